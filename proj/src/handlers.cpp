#include "budamaf/handlers.hpp"

namespace budamaf::handlers {

namespace {

offloading::CollectionRef ref_from(const json& j) {
    return {j.value("store_id", ""), j.value("collection", "default")};
}

Result<json> result_to_json(const offloading::QueryResult& r) {
    if (!r.ok && r.error) return *r.error;
    return offloading::query_result_to_json(r);
}

}  // namespace

OffloadingHandler::OffloadingHandler(offloading::OffloadingApis* apis) : apis_(apis) {}

Status OffloadingHandler::require_store_owner(const protocol::JobRecord& job,
                                              const std::string& store_id) {
    if (job.initiator.has_role(protocol::Role::admin)) return Status::ok_status();
    auto desc = apis_->store(store_id);
    if (!desc) return Status(Err::StoreNotFound, "store " + store_id + " not in catalog");
    if (desc->owner != job.initiator.principal_id)
        return Status(Err::AccessDenied,
                      "store " + store_id + " is owned by " + desc->owner);
    return Status::ok_status();
}

Result<json> OffloadingHandler::handle_data_op(const protocol::JobRecord& job) {
    const json& d = job.job_details;
    wrappers::UniformQuery q;
    switch (job.job_description) {
        case protocol::JobKind::read: q.op = wrappers::QueryOp::read; break;
        case protocol::JobKind::write: q.op = wrappers::QueryOp::write; break;
        case protocol::JobKind::update: q.op = wrappers::QueryOp::update; break;
        default: q.op = wrappers::QueryOp::del; break;
    }
    q.store_id = d.value("store_id", "");
    q.collection = d.value("collection", "default");
    if (d.contains("key")) q.key = d["key"].get<std::string>();
    if (d.contains("selector") && d["selector"].is_object()) q.selector = d["selector"];
    if (d.contains("value_b64")) {
        auto payload = base64_decode(d["value_b64"].get<std::string>());
        if (!payload) return Error{Err::SchemaViolation, "value_b64 is not base64"};
        q.payload = std::move(*payload);
    }
    if (d.contains("txn_id") && d["txn_id"].is_string())
        q.txn_id = d["txn_id"].get<std::string>();
    return result_to_json(apis_->dispatch(q));
}

Result<json> OffloadingHandler::handle_job(const protocol::JobRecord& job) {
    const json& d = job.job_details;
    using protocol::JobKind;
    switch (job.job_description) {
        case JobKind::read:
        case JobKind::write:
        case JobKind::update:
        case JobKind::del:
            return handle_data_op(job);

        case JobKind::create_store: {
            auto kind = wrappers::store_kind_from_name(d.value("kind", ""));
            if (!kind) return Error{Err::SchemaViolation, "unknown store kind"};
            std::vector<std::string> machines =
                d["machines"].get<std::vector<std::string>>();
            auto created =
                apis_->create_store(*kind, d.value("provider_id", ""), machines,
                                    job.initiator.principal_id,
                                    d.value("store_id", ""));
            if (!created) return created.error();
            return offloading::store_descriptor_to_json(created.value());
        }
        case JobKind::destroy_store: {
            std::string store_id = d.value("store_id", "");
            if (auto s = require_store_owner(job, store_id); !s.ok()) return s.error();
            if (auto s = apis_->destroy_store(store_id); !s.ok()) return s.error();
            return json{{"destroyed", store_id}};
        }
        case JobKind::scale_store: {
            std::string store_id = d.value("store_id", "");
            if (auto s = require_store_owner(job, store_id); !s.ok()) return s.error();
            auto scaled = apis_->scale_store(
                store_id, d["machines"].get<std::vector<std::string>>(),
                d.value("provider_id", ""));
            if (!scaled) return scaled.error();
            return offloading::store_descriptor_to_json(scaled.value());
        }
        case JobKind::relocate_store: {
            std::string store_id = d.value("store_id", "");
            if (auto s = require_store_owner(job, store_id); !s.ok()) return s.error();
            auto moved = apis_->relocate_store(store_id, d.value("new_provider", ""));
            if (!moved) return moved.error();
            return offloading::store_descriptor_to_json(moved.value());
        }
        case JobKind::migrate: {
            auto src = ref_from(d["src"]);
            auto dst = ref_from(d["dst"]);
            if (auto s = require_store_owner(job, src.store_id); !s.ok())
                return s.error();
            if (auto s = require_store_owner(job, dst.store_id); !s.ok())
                return s.error();
            auto report = apis_->migrate(src, dst);
            if (!report) return report.error();
            return offloading::migration_report_to_json(report.value());
        }
        case JobKind::replicate: {
            auto src = ref_from(d["src"]);
            auto dst = ref_from(d["dst"]);
            if (auto s = require_store_owner(job, src.store_id); !s.ok())
                return s.error();
            if (auto s = require_store_owner(job, dst.store_id); !s.ok())
                return s.error();
            auto mode = d.value("mode", "one_shot") == "continuous"
                            ? offloading::ReplicationLink::Mode::continuous
                            : offloading::ReplicationLink::Mode::one_shot;
            auto link = apis_->replicate(src, dst, mode);
            if (!link) return link.error();
            if (mode == offloading::ReplicationLink::Mode::continuous) {
                std::lock_guard lk(mu_);
                job_links_[job.job_id] = link.value().link_id;
            }
            return offloading::replication_link_to_json(link.value());
        }
        case JobKind::offload: {
            auto plan = apis_->offload(d.value("store_id", ""));
            if (!plan) return plan.error();
            return offloading::offload_plan_to_json(plan.value());
        }
        case JobKind::publish: {
            auto audience = d["audience"].get<std::vector<std::string>>();
            if (auto s = apis_->publish(job.initiator, d.value("dataset_id", ""),
                                        audience);
                !s.ok())
                return s.error();
            return json{{"published", d.value("dataset_id", "")},
                        {"audience", audience}};
        }
        case JobKind::anonymize:
        case JobKind::encrypt: {
            auto report = apis_->apply_transform(
                job.initiator, d.value("dataset_id", ""),
                protocol::job_kind_name(job.job_description));
            if (!report) return report.error();
            return json{{"records", report.value().records}};
        }
        default:
            return Error{Err::UnknownJobType, "job kind not handled by this component"};
    }
}

void OffloadingHandler::cancel_job(const std::string& job_id) {
    std::string link_id;
    {
        std::lock_guard lk(mu_);
        auto it = job_links_.find(job_id);
        if (it == job_links_.end()) return;
        link_id = it->second;
        job_links_.erase(it);
    }
    (void)apis_->remove_link(link_id);
}

SecurityHandler::SecurityHandler(security::SecurityEngine* engine) : engine_(engine) {}

Result<json> SecurityHandler::handle_job(const protocol::JobRecord& job) {
    const json& d = job.job_details;
    switch (job.job_description) {
        case protocol::JobKind::protocol_query: {
            auto cls = security::data_class_from_name(d.value("data_class", ""));
            if (!cls) return Error{Err::SchemaViolation, "unknown data class"};
            auto protocols =
                engine_->protocol_query(*cls, job.initiator, d.value("owner", ""));
            return security::protocol_set_to_json(protocols);
        }
        case protocol::JobKind::access_check: {
            auto action = security::acl_action_from_name(d.value("action", ""));
            if (!action) return Error{Err::SchemaViolation, "unknown action"};
            protocol::Credentials subject = job.initiator;
            if (d.contains("principal_id")) {
                subject = protocol::Credentials{};
                subject.principal_id = d["principal_id"].get<std::string>();
            }
            auto decision =
                engine_->check_access(subject, d.value("dataset_id", ""), *action);
            if (!decision) return decision.error();
            return json{{"allowed", decision.value().allowed},
                        {"reason", decision.value().reason},
                        {"protocols",
                         security::protocol_set_to_json(decision.value().protocols)}};
        }
        case protocol::JobKind::policy_update: {
            auto version = engine_->policy_update(job.initiator, d["update"]);
            if (!version) return version.error();
            return json{{"version", version.value()}};
        }
        default:
            return Error{Err::UnknownJobType, "job kind not handled by this component"};
    }
}

AnalyticsHandler::AnalyticsHandler(analytics::AnalyticsEngine* engine)
    : engine_(engine) {}

Result<json> AnalyticsHandler::handle_job(const protocol::JobRecord& job) {
    const json& d = job.job_details;
    switch (job.job_description) {
        case protocol::JobKind::analytics_save: {
            analytics::DatasetDescriptor descriptor;
            descriptor.dataset_id = d.value("dataset_id", "");
            descriptor.description = d.value("description", json::object());
            if (d.contains("locations")) {
                for (const auto& l : d["locations"])
                    descriptor.locations.push_back(ref_from(l));
            }
            std::vector<Bytes> records;
            for (const auto& b64 : d.value("records_b64", json::array())) {
                auto bytes = base64_decode(b64.get<std::string>());
                if (!bytes)
                    return Error{Err::SchemaViolation, "records_b64 entry not base64"};
                records.push_back(std::move(*bytes));
            }
            auto count = engine_->save(job.initiator, descriptor, records);
            if (!count) return count.error();
            return json{{"count", count.value()}};
        }
        case protocol::JobKind::analytics_retrieve: {
            auto records =
                engine_->retrieve(job.initiator, d.value("description", json::object()));
            if (!records) return records.error();
            json out = json::array();
            for (const auto& r : records.value()) out.push_back(base64_encode(r));
            return json{{"records_b64", out}};
        }
        default:
            return Error{Err::UnknownJobType, "job kind not handled by this component"};
    }
}

}  // namespace budamaf::handlers
