#include "budamaf/analytics.hpp"

#include <algorithm>

namespace budamaf::analytics {

json dataset_descriptor_to_json(const DatasetDescriptor& d) {
    json locations = json::array();
    for (const auto& l : d.locations)
        locations.push_back(json{{"store_id", l.store_id}, {"collection", l.collection}});
    return json{{"dataset_id", d.dataset_id},
                {"description", d.description},
                {"locations", locations},
                {"next_seq", d.next_seq}};
}

Result<DatasetDescriptor> dataset_descriptor_from_json(const json& j) {
    if (!j.is_object() || !j.contains("dataset_id"))
        return Error{Err::MalformedRequest, "descriptor needs dataset_id"};
    DatasetDescriptor d;
    d.dataset_id = j["dataset_id"].get<std::string>();
    d.description = j.value("description", json::object());
    d.next_seq = j.value("next_seq", std::uint64_t{0});
    if (j.contains("locations")) {
        if (!j["locations"].is_array())
            return Error{Err::MalformedRequest, "locations must be an array"};
        for (const auto& l : j["locations"]) {
            if (!l.is_object() || !l.contains("store_id") || !l.contains("collection"))
                return Error{Err::MalformedRequest,
                             "location needs store_id and collection"};
            d.locations.push_back(
                {l["store_id"].get<std::string>(), l["collection"].get<std::string>()});
        }
    }
    return d;
}

namespace {

bool description_matches(const json& query, const json& description) {
    if (!query.is_object()) return false;
    for (auto it = query.begin(); it != query.end(); ++it) {
        if (!description.contains(it.key()) || description[it.key()] != it.value())
            return false;
    }
    return true;
}

std::string record_key(const std::string& dataset_id, std::uint64_t seq) {
    return dataset_id + ":r" + std::to_string(seq);
}

Status default_probe(const std::string& endpoint) {
    if (endpoint.rfind("inproc://", 0) == 0) return Status::ok_status();
    return Status(Err::Unreachable, "endpoint " + endpoint + " did not answer");
}

}  // namespace

AnalyticsEngine::AnalyticsEngine(offloading::OffloadingApis* offloading,
                                 security::SecurityEngine* security, Options opts)
    : offloading_(offloading), security_(security), opts_(std::move(opts)) {
    if (!opts_.endpoint_probe) opts_.endpoint_probe = default_probe;
}

Result<DatasetDescriptor> AnalyticsEngine::load_descriptor(
    const std::string& dataset_id) const {
    wrappers::UniformQuery q;
    q.op = wrappers::QueryOp::read;
    q.store_id = opts_.catalog_store;
    q.collection = opts_.catalog_collection;
    q.key = dataset_id;
    auto result = offloading_->dispatch(q);
    if (!result.ok)
        return Error{result.error ? result.error->code : Err::NotFound,
                     "descriptor not in catalog"};
    json doc = json::parse(to_string(*result.payload), nullptr, false);
    if (doc.is_discarded())
        return Error{Err::InternalError, "catalog entry is not valid JSON"};
    return dataset_descriptor_from_json(doc);
}

Status AnalyticsEngine::store_descriptor(const DatasetDescriptor& d) {
    wrappers::UniformQuery q;
    q.op = wrappers::QueryOp::write;
    q.store_id = opts_.catalog_store;
    q.collection = opts_.catalog_collection;
    q.key = d.dataset_id;
    q.payload = to_bytes(dataset_descriptor_to_json(d).dump());
    auto result = offloading_->dispatch(q);
    if (!result.ok)
        return Status(result.error ? result.error->code : Err::InternalError,
                      "catalog write failed");
    return Status::ok_status();
}

Result<std::uint64_t> AnalyticsEngine::save(const protocol::Credentials& creds,
                                            const DatasetDescriptor& descriptor,
                                            const std::vector<Bytes>& records) {
    if (descriptor.dataset_id.empty())
        return Error{Err::SchemaViolation, "descriptor needs dataset_id"};

    std::lock_guard lk(mu_);

    DatasetDescriptor effective = descriptor;
    if (auto existing = load_descriptor(descriptor.dataset_id)) {
        effective = existing.value();
        if (!descriptor.description.empty() && effective.description.empty())
            effective.description = descriptor.description;
    } else if (descriptor.locations.empty()) {
        return Error{Err::SchemaViolation,
                     "new dataset " + descriptor.dataset_id + " needs locations"};
    }
    for (const auto& l : effective.locations)
        if (!offloading_->store(l.store_id))
            return Error{Err::StoreNotFound,
                         "location store " + l.store_id + " not in catalog"};

    (void)security_->ensure_dataset(effective.dataset_id, creds.principal_id,
                              effective.description, creds);
    auto decision = security_->check_access(creds, effective.dataset_id,
                                            security::AclAction::write);
    if (!decision) return decision.error();
    if (!decision.value().allowed)
        return Error{Err::AccessDenied,
                     "no write grant on dataset " + effective.dataset_id + ": " +
                         decision.value().reason};

    std::uint64_t written = 0;
    for (const auto& record : records) {
        const auto& at = effective.locations[effective.next_seq %
                                             effective.locations.size()];
        wrappers::UniformQuery q;
        q.op = wrappers::QueryOp::write;
        q.store_id = at.store_id;
        q.collection = at.collection;
        q.key = record_key(effective.dataset_id, effective.next_seq);
        q.payload = record;
        auto result = offloading_->dispatch(q);
        if (!result.ok)
            return Error{result.error ? result.error->code : Err::StoreNotReady,
                         "record write failed: " +
                             (result.error ? result.error->message : "")};
        offloading_->note_dataset_location(effective.dataset_id, at);
        effective.next_seq++;
        written++;
    }
    if (auto st = store_descriptor(effective); !st.ok()) return st.error();
    return written;
}

Result<std::vector<Bytes>> AnalyticsEngine::retrieve(
    const protocol::Credentials& creds, const json& description) {
    std::vector<DatasetDescriptor> matched;
    for (const auto& d : catalog())
        if (description_matches(description, d.description)) matched.push_back(d);

    for (const auto& d : matched) {
        auto decision =
            security_->check_access(creds, d.dataset_id, security::AclAction::read);
        if (!decision) return decision.error();
        if (!decision.value().allowed)
            return Error{Err::AccessDenied,
                         "no read grant on matched dataset " + d.dataset_id};
    }

    std::vector<Bytes> out;
    for (const auto& d : matched) {
        std::string prefix = d.dataset_id + ":r";
        for (const auto& at : d.locations) {
            auto snap = offloading_->snapshot_collection(at.store_id, at.collection);
            if (!snap) {
                if (snap.error().code == Err::UnknownCollection) continue;
                return snap.error();
            }
            for (const auto& e : snap.value())
                if (e.key.rfind(prefix, 0) == 0) out.push_back(e.value);
        }
    }
    return out;
}

Status AnalyticsEngine::register_module(const protocol::Credentials& creds,
                                        const AnalyticsModule& module) {
    if (!creds.has_role(protocol::Role::admin))
        return Status(Err::AccessDenied, "module registration requires admin");
    if (auto st = opts_.endpoint_probe(module.endpoint); !st.ok())
        return Status(Err::Unreachable,
                      "module endpoint " + module.endpoint + " did not answer");
    std::lock_guard lk(mu_);
    if (modules_.count(module.module_id) > 0)
        return Status(Err::DuplicateId, "module " + module.module_id + " exists");
    modules_[module.module_id] = module;
    return Status::ok_status();
}

std::vector<AnalyticsModule> AnalyticsEngine::modules() const {
    std::lock_guard lk(mu_);
    std::vector<AnalyticsModule> out;
    for (const auto& [_, m] : modules_) out.push_back(m);
    return out;
}

std::vector<DatasetDescriptor> AnalyticsEngine::catalog() const {
    std::vector<DatasetDescriptor> out;
    auto snap = offloading_->snapshot_collection(opts_.catalog_store,
                                                 opts_.catalog_collection);
    if (!snap) return out;
    for (const auto& e : snap.value()) {
        json doc = json::parse(to_string(e.value), nullptr, false);
        if (doc.is_discarded()) continue;
        auto d = dataset_descriptor_from_json(doc);
        if (d) out.push_back(std::move(d.value()));
    }
    return out;
}

std::optional<DatasetDescriptor> AnalyticsEngine::descriptor(
    const std::string& dataset_id) const {
    auto d = load_descriptor(dataset_id);
    if (!d) return std::nullopt;
    return d.value();
}

// ---------------------------------------------------------------------------

SampleAnalyticsModule::SampleAnalyticsModule(SubmitFn submit, Config config)
    : submit_(std::move(submit)), config_(std::move(config)) {}

Result<json> SampleAnalyticsModule::run(std::uint64_t from_tick,
                                        std::uint64_t to_tick) {
    json retrieve_request{
        {"initiator", protocol::credentials_to_json(config_.credentials)},
        {"job_description", "analytics_retrieve"},
        {"job_details", {{"description", config_.monitoring_description}}}};
    auto retrieved = submit_(retrieve_request);
    if (!retrieved) return retrieved.error();

    std::map<std::string, std::uint64_t> per_store;
    double depth_sum = 0;
    std::uint64_t seen = 0;
    for (const auto& record : retrieved.value().value("records", json::array())) {
        if (!record.is_object()) continue;
        std::uint64_t tick = record.value("tick", std::uint64_t{0});
        if (tick < from_tick || tick >= to_tick) continue;
        per_store[record.value("store_id", std::string("unknown"))]++;
        depth_sum += record.value("queue_depth", 0.0);
        ++seen;
    }

    json report{{"window", {{"from", from_tick}, {"to", to_tick}}},
                {"per_store_requests", per_store},
                {"mean_queue_depth", seen == 0 ? 0.0 : depth_sum / seen},
                {"records_seen", seen}};

    json save_request{
        {"initiator", protocol::credentials_to_json(config_.credentials)},
        {"job_description", "analytics_save"},
        {"job_details",
         {{"dataset_id", config_.report_dataset},
          {"description",
           {{"source", "analytics"}, {"data_class", "federation"}}},
          {"locations",
           json::array({{{"store_id", config_.report_location.store_id},
                         {"collection", config_.report_location.collection}}})},
          {"records", json::array({report})}}}};
    auto saved = submit_(save_request);
    if (!saved) return saved.error();
    return report;
}

}  // namespace budamaf::analytics
