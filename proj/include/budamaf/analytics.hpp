#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "budamaf/offloading.hpp"
#include "budamaf/protocol.hpp"
#include "budamaf/result.hpp"
#include "budamaf/security.hpp"

namespace budamaf::analytics {

using json = nlohmann::json;

struct DatasetDescriptor {
    std::string dataset_id;
    json description = json::object();  // attribute filters
    std::vector<offloading::CollectionRef> locations;
    std::uint64_t next_seq = 0;
};

json dataset_descriptor_to_json(const DatasetDescriptor& d);
Result<DatasetDescriptor> dataset_descriptor_from_json(const json& j);

struct AnalyticsModule {
    std::string module_id;
    std::string endpoint;
};

// Access point for analytics modules: saves and retrieves described
// datasets across heterogeneous stores with access control. It performs no
// analytics and never transforms record contents.
class AnalyticsEngine {
public:
    struct Options {
        std::string catalog_store;                  // federation-owned key_value store
        std::string catalog_collection = "__datasets";
        // Reachability probe for module endpoints; the HTTP layer installs a
        // real one.
        std::function<Status(const std::string&)> endpoint_probe;
    };

    AnalyticsEngine(offloading::OffloadingApis* offloading,
                    security::SecurityEngine* security, Options opts);

    // Records arrive already protocol-enforced by the Core; this engine only
    // places them. Partitioning is round-robin across the descriptor's
    // locations.
    Result<std::uint64_t> save(const protocol::Credentials& creds,
                               const DatasetDescriptor& descriptor,
                               const std::vector<Bytes>& records);

    // Merged record stream across every dataset whose description matches.
    // Fail-closed: one unauthorized matched dataset denies the whole request.
    Result<std::vector<Bytes>> retrieve(const protocol::Credentials& creds,
                                        const json& description);

    Status register_module(const protocol::Credentials& creds,
                           const AnalyticsModule& module);
    std::vector<AnalyticsModule> modules() const;

    std::vector<DatasetDescriptor> catalog() const;
    std::optional<DatasetDescriptor> descriptor(const std::string& dataset_id) const;

private:
    Result<DatasetDescriptor> load_descriptor(const std::string& dataset_id) const;
    Status store_descriptor(const DatasetDescriptor& d);

    offloading::OffloadingApis* offloading_;
    security::SecurityEngine* security_;
    Options opts_;

    mutable std::mutex mu_;
    std::map<std::string, AnalyticsModule> modules_;
    std::map<std::string, std::uint64_t> save_seq_;  // per-dataset serialization
};

// Demonstration analytics module: counts monitoring records per store and
// averages queue depth over a tick window, then saves the report back as a
// federation-class dataset. It talks to the gateway exclusively through the
// submitted-job interface, like any externally connected module.
class SampleAnalyticsModule {
public:
    using SubmitFn = std::function<Result<json>(const json& job_request)>;

    struct Config {
        protocol::Credentials credentials;
        std::string report_dataset = "analytics-reports";
        offloading::CollectionRef report_location;
        json monitoring_description = json{{"source", "monitoring"}};
    };

    SampleAnalyticsModule(SubmitFn submit, Config config);

    // Window is [from_tick, to_tick).
    Result<json> run(std::uint64_t from_tick, std::uint64_t to_tick);

private:
    SubmitFn submit_;
    Config config_;
};

}  // namespace budamaf::analytics
