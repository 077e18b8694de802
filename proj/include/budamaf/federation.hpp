#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "budamaf/capacity.hpp"
#include "budamaf/result.hpp"

namespace budamaf::federation {

using json = nlohmann::json;

// Latency assumed when a provider's map has no entry for the user's region.
constexpr double kDefaultLatencyMs = 100.0;

struct ProviderDescriptor {
    std::string provider_id;
    std::string region;
    std::uint32_t capacity_machines = 0;
    double price_storage = 0.0;  // per GB-hour
    double price_egress = 0.0;   // per GB
    double price_request = 0.0;  // per 1000 requests
    std::map<std::string, double> latency_ms;  // region -> milliseconds

    double latency_to(const std::string& region_name) const;
};

json provider_to_json(const ProviderDescriptor& p);
Result<ProviderDescriptor> provider_from_json(const json& j);

struct CostQuote {
    std::string provider_id;
    double monetary = 0.0;         // currency per hour
    double latency_penalty = 0.0;  // dimensionless, latency / 100 ms
    double score = 0.0;            // monetary + lambda * latency_penalty
};

enum class PlacementMode { cost_first, availability_first };

const char* placement_mode_name(PlacementMode m);
std::optional<PlacementMode> placement_mode_from_name(std::string_view name);

struct PlacementRequest {
    std::uint32_t machines = 1;
    double expected_storage_gb = 0.0;
    double expected_egress_gb_per_h = 0.0;
    double expected_requests_per_h = 0.0;
    std::string user_region;
    PlacementMode mode = PlacementMode::cost_first;
};

struct PlacementConfig {
    double lambda_cost_first = 1.0;
    double lambda_availability_first = 4.0;
};

struct PlacementDecision {
    CostQuote primary;
    std::optional<CostQuote> replica;  // required in availability_first mode
    PlacementMode mode = PlacementMode::cost_first;
    double lambda = 1.0;
};

// No quote when the provider cannot host the requested machines.
Result<CostQuote> quote(const ProviderDescriptor& p, const PlacementRequest& r,
                        double lambda);

// Argmin score among feasible quotes; ties broken by lexicographic
// provider_id. availability_first picks the two best distinct providers.
Result<PlacementDecision> choose_placement(
    const std::vector<ProviderDescriptor>& providers, const PlacementRequest& r,
    const PlacementConfig& cfg = {});

// The simulated federation's provider pool. Tracks free capacity per
// provider; allocated + free equals declared capacity at all times.
class ProviderRegistry : public offloading::CapacityPool {
public:
    // Nominal usage profile priced into offload scale offers.
    struct ScaleProfile {
        double storage_gb = 10.0;
        double egress_gb_per_h = 1.0;
        double requests_per_h = 1000.0;
        double lambda = 1.0;
    };

    ProviderRegistry();
    explicit ProviderRegistry(ScaleProfile profile);

    Status add_provider(const ProviderDescriptor& p);
    std::optional<ProviderDescriptor> provider(const std::string& provider_id) const;
    std::vector<ProviderDescriptor> providers() const;

    std::uint32_t free_capacity(const std::string& provider_id) const;
    std::uint32_t allocated(const std::string& provider_id) const;

    // CapacityPool
    Status reserve(const std::string& provider_id, std::uint32_t machines) override;
    void release(const std::string& provider_id, std::uint32_t machines) override;
    bool has_capacity(const std::string& provider_id,
                      std::uint32_t machines) const override;
    std::optional<std::string> provider_region(
        const std::string& provider_id) const override;
    Result<offloading::ScaleOffer> best_scale_offer(
        std::uint32_t machines, const std::string& user_region) override;

private:
    struct Slot {
        ProviderDescriptor descriptor;
        std::uint32_t allocated = 0;
        std::uint64_t machine_seq = 0;
    };

    mutable std::mutex mu_;
    std::map<std::string, Slot> slots_;
    ScaleProfile profile_;
};

}  // namespace budamaf::federation
