#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "budamaf/result.hpp"

namespace budamaf::offloading {

struct ScaleOffer {
    std::string provider_id;
    std::vector<std::string> machines;
};

// Capacity view the off-loading APIs check placements against. Implemented
// by the simulated federation's provider registry.
class CapacityPool {
public:
    virtual ~CapacityPool() = default;
    virtual Status reserve(const std::string& provider_id, std::uint32_t machines) = 0;
    virtual void release(const std::string& provider_id, std::uint32_t machines) = 0;
    virtual bool has_capacity(const std::string& provider_id,
                              std::uint32_t machines) const = 0;
    virtual std::optional<std::string> provider_region(
        const std::string& provider_id) const = 0;
    // Cheapest quote among providers that can host `machines` more machines.
    virtual Result<ScaleOffer> best_scale_offer(std::uint32_t machines,
                                                const std::string& user_region) = 0;
};

}  // namespace budamaf::offloading
