#include "budamaf/federation.hpp"

#include <algorithm>

namespace budamaf::federation {

double ProviderDescriptor::latency_to(const std::string& region_name) const {
    if (region_name.empty()) return 0.0;
    auto it = latency_ms.find(region_name);
    return it == latency_ms.end() ? kDefaultLatencyMs : it->second;
}

json provider_to_json(const ProviderDescriptor& p) {
    return json{{"provider_id", p.provider_id},
                {"region", p.region},
                {"capacity_machines", p.capacity_machines},
                {"price_storage", p.price_storage},
                {"price_egress", p.price_egress},
                {"price_request", p.price_request},
                {"latency_ms", p.latency_ms}};
}

Result<ProviderDescriptor> provider_from_json(const json& j) {
    if (!j.is_object() || !j.contains("provider_id"))
        return Error{Err::MalformedRequest, "provider needs provider_id"};
    ProviderDescriptor p;
    p.provider_id = j["provider_id"].get<std::string>();
    p.region = j.value("region", "");
    p.capacity_machines = j.value("capacity_machines", 0u);
    p.price_storage = j.value("price_storage", 0.0);
    p.price_egress = j.value("price_egress", 0.0);
    p.price_request = j.value("price_request", 0.0);
    if (p.price_storage < 0 || p.price_egress < 0 || p.price_request < 0)
        return Error{Err::MalformedRequest, "prices must be non-negative"};
    if (j.contains("latency_ms") && j["latency_ms"].is_object())
        for (auto it = j["latency_ms"].begin(); it != j["latency_ms"].end(); ++it)
            p.latency_ms[it.key()] = it.value().get<double>();
    return p;
}

const char* placement_mode_name(PlacementMode m) {
    return m == PlacementMode::cost_first ? "cost_first" : "availability_first";
}

std::optional<PlacementMode> placement_mode_from_name(std::string_view name) {
    if (name == "cost_first") return PlacementMode::cost_first;
    if (name == "availability_first") return PlacementMode::availability_first;
    return std::nullopt;
}

Result<CostQuote> quote(const ProviderDescriptor& p, const PlacementRequest& r,
                        double lambda) {
    if (p.capacity_machines < r.machines)
        return Error{Err::CapacityExceeded,
                     p.provider_id + " cannot host " + std::to_string(r.machines) +
                         " machines"};
    CostQuote q;
    q.provider_id = p.provider_id;
    q.monetary = r.expected_storage_gb * p.price_storage +
                 r.expected_egress_gb_per_h * p.price_egress +
                 (r.expected_requests_per_h / 1000.0) * p.price_request;
    q.latency_penalty = p.latency_to(r.user_region) / 100.0;
    q.score = q.monetary + lambda * q.latency_penalty;
    return q;
}

Result<PlacementDecision> choose_placement(
    const std::vector<ProviderDescriptor>& providers, const PlacementRequest& r,
    const PlacementConfig& cfg) {
    double lambda = r.mode == PlacementMode::cost_first
                        ? cfg.lambda_cost_first
                        : cfg.lambda_availability_first;
    std::vector<CostQuote> quotes;
    for (const auto& p : providers) {
        auto q = quote(p, r, lambda);
        if (q) quotes.push_back(std::move(q.value()));
    }
    if (quotes.empty())
        return Error{Err::NoFeasiblePlacement, "no provider can host the request"};

    std::sort(quotes.begin(), quotes.end(), [](const CostQuote& a, const CostQuote& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.provider_id < b.provider_id;
    });

    PlacementDecision d;
    d.mode = r.mode;
    d.lambda = lambda;
    d.primary = quotes.front();
    if (r.mode == PlacementMode::availability_first) {
        if (quotes.size() < 2)
            return Error{Err::NoFeasiblePlacement,
                         "availability_first requires a replica target"};
        d.replica = quotes[1];
    }
    return d;
}

ProviderRegistry::ProviderRegistry() : ProviderRegistry(ScaleProfile{}) {}

ProviderRegistry::ProviderRegistry(ScaleProfile profile) : profile_(profile) {}

Status ProviderRegistry::add_provider(const ProviderDescriptor& p) {
    std::lock_guard lk(mu_);
    if (slots_.count(p.provider_id) > 0)
        return Status(Err::DuplicateId, "provider " + p.provider_id + " exists");
    slots_[p.provider_id] = Slot{p, 0, 0};
    return Status::ok_status();
}

std::optional<ProviderDescriptor> ProviderRegistry::provider(
    const std::string& provider_id) const {
    std::lock_guard lk(mu_);
    auto it = slots_.find(provider_id);
    if (it == slots_.end()) return std::nullopt;
    return it->second.descriptor;
}

std::vector<ProviderDescriptor> ProviderRegistry::providers() const {
    std::lock_guard lk(mu_);
    std::vector<ProviderDescriptor> out;
    for (const auto& [_, slot] : slots_) out.push_back(slot.descriptor);
    return out;
}

std::uint32_t ProviderRegistry::free_capacity(const std::string& provider_id) const {
    std::lock_guard lk(mu_);
    auto it = slots_.find(provider_id);
    if (it == slots_.end()) return 0;
    return it->second.descriptor.capacity_machines - it->second.allocated;
}

std::uint32_t ProviderRegistry::allocated(const std::string& provider_id) const {
    std::lock_guard lk(mu_);
    auto it = slots_.find(provider_id);
    return it == slots_.end() ? 0 : it->second.allocated;
}

Status ProviderRegistry::reserve(const std::string& provider_id,
                                 std::uint32_t machines) {
    std::lock_guard lk(mu_);
    auto it = slots_.find(provider_id);
    if (it == slots_.end())
        return Status(Err::CapacityExceeded, "unknown provider " + provider_id);
    Slot& slot = it->second;
    if (slot.descriptor.capacity_machines - slot.allocated < machines)
        return Status(Err::CapacityExceeded,
                      provider_id + " has no capacity for " +
                          std::to_string(machines) + " machines");
    slot.allocated += machines;
    return Status::ok_status();
}

void ProviderRegistry::release(const std::string& provider_id,
                               std::uint32_t machines) {
    std::lock_guard lk(mu_);
    auto it = slots_.find(provider_id);
    if (it == slots_.end()) return;
    it->second.allocated -= std::min(it->second.allocated, machines);
}

bool ProviderRegistry::has_capacity(const std::string& provider_id,
                                    std::uint32_t machines) const {
    return free_capacity(provider_id) >= machines;
}

std::optional<std::string> ProviderRegistry::provider_region(
    const std::string& provider_id) const {
    std::lock_guard lk(mu_);
    auto it = slots_.find(provider_id);
    if (it == slots_.end()) return std::nullopt;
    return it->second.descriptor.region;
}

Result<offloading::ScaleOffer> ProviderRegistry::best_scale_offer(
    std::uint32_t machines, const std::string& user_region) {
    PlacementRequest req;
    req.machines = machines;
    req.expected_storage_gb = profile_.storage_gb;
    req.expected_egress_gb_per_h = profile_.egress_gb_per_h;
    req.expected_requests_per_h = profile_.requests_per_h;
    req.user_region = user_region;
    req.mode = PlacementMode::cost_first;

    std::vector<ProviderDescriptor> available;
    {
        std::lock_guard lk(mu_);
        for (const auto& [_, slot] : slots_) {
            ProviderDescriptor d = slot.descriptor;
            d.capacity_machines -= std::min(d.capacity_machines, slot.allocated);
            available.push_back(std::move(d));
        }
    }
    PlacementConfig cfg;
    cfg.lambda_cost_first = profile_.lambda;
    auto decision = choose_placement(available, req, cfg);
    if (!decision)
        return Error{Err::CapacityExceeded, "no provider has free capacity"};

    offloading::ScaleOffer offer;
    offer.provider_id = decision.value().primary.provider_id;
    std::lock_guard lk(mu_);
    Slot& slot = slots_[offer.provider_id];
    for (std::uint32_t i = 0; i < machines; ++i)
        offer.machines.push_back("m-" + offer.provider_id + "-" +
                                 std::to_string(++slot.machine_seq));
    return offer;
}

}  // namespace budamaf::federation
