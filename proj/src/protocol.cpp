#include "budamaf/protocol.hpp"

#include <atomic>
#include <unordered_map>

namespace budamaf {

const char* err_name(Err code) {
    switch (code) {
        case Err::MalformedRequest: return "MalformedRequest";
        case Err::UnknownJobType: return "UnknownJobType";
        case Err::SchemaViolation: return "SchemaViolation";
        case Err::IllegalTransition: return "IllegalTransition";
        case Err::AuthenticationFailed: return "AuthenticationFailed";
        case Err::AccessDenied: return "AccessDenied";
        case Err::UnknownDataset: return "UnknownDataset";
        case Err::InvalidPolicy: return "InvalidPolicy";
        case Err::MethodNotAllowed: return "MethodNotAllowed";
        case Err::Overloaded: return "Overloaded";
        case Err::NotFound: return "NotFound";
        case Err::ChannelClosed: return "ChannelClosed";
        case Err::IntegrityViolation: return "IntegrityViolation";
        case Err::TransformFailure: return "TransformFailure";
        case Err::Unreachable: return "Unreachable";
        case Err::DuplicateId: return "DuplicateId";
        case Err::StoreNotFound: return "StoreNotFound";
        case Err::StoreNotReady: return "StoreNotReady";
        case Err::WrapperError: return "WrapperError";
        case Err::CapabilityMissing: return "CapabilityMissing";
        case Err::CapacityExceeded: return "CapacityExceeded";
        case Err::NoWrapperForKind: return "NoWrapperForKind";
        case Err::MigrationFailed: return "MigrationFailed";
        case Err::VerificationFailed: return "VerificationFailed";
        case Err::LinkExists: return "LinkExists";
        case Err::NoRemedy: return "NoRemedy";
        case Err::BadSelector: return "BadSelector";
        case Err::TxnUnknown: return "TxnUnknown";
        case Err::DeadlineExceeded: return "DeadlineExceeded";
        case Err::UnknownCollection: return "UnknownCollection";
        case Err::NoFeasiblePlacement: return "NoFeasiblePlacement";
        case Err::ScenarioAssertionFailed: return "ScenarioAssertionFailed";
        case Err::Cancelled: return "Cancelled";
        case Err::UsageError: return "UsageError";
        case Err::TransportError: return "TransportError";
        case Err::InternalError: return "InternalError";
    }
    return "InternalError";
}

Err err_from_name(std::string_view name) {
    static const std::unordered_map<std::string_view, Err> table = [] {
        std::unordered_map<std::string_view, Err> t;
        for (int i = 0; i <= static_cast<int>(Err::InternalError); ++i) {
            Err e = static_cast<Err>(i);
            t.emplace(err_name(e), e);
        }
        return t;
    }();
    auto it = table.find(name);
    return it == table.end() ? Err::InternalError : it->second;
}

}  // namespace budamaf

namespace budamaf::protocol {

namespace {

struct KindName {
    JobKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {JobKind::read, "read"},
    {JobKind::write, "write"},
    {JobKind::update, "update"},
    {JobKind::del, "delete"},
    {JobKind::create_store, "create_store"},
    {JobKind::destroy_store, "destroy_store"},
    {JobKind::scale_store, "scale_store"},
    {JobKind::relocate_store, "relocate_store"},
    {JobKind::migrate, "migrate"},
    {JobKind::replicate, "replicate"},
    {JobKind::offload, "offload"},
    {JobKind::publish, "publish"},
    {JobKind::anonymize, "anonymize"},
    {JobKind::encrypt, "encrypt"},
    {JobKind::policy_update, "policy_update"},
    {JobKind::access_check, "access_check"},
    {JobKind::protocol_query, "protocol_query"},
    {JobKind::analytics_save, "analytics_save"},
    {JobKind::analytics_retrieve, "analytics_retrieve"},
    {JobKind::status_query, "status_query"},
};

}  // namespace

const char* job_kind_name(JobKind kind) {
    for (const auto& e : kKindNames)
        if (e.kind == kind) return e.name;
    return "unknown";
}

std::optional<JobKind> job_kind_from_name(std::string_view name) {
    for (const auto& e : kKindNames)
        if (name == e.name) return e.kind;
    return std::nullopt;
}

const char* job_status_name(JobStatus status) {
    switch (status) {
        case JobStatus::pending: return "pending";
        case JobStatus::running: return "running";
        case JobStatus::finished: return "finished";
        case JobStatus::crashed: return "crashed";
    }
    return "unknown";
}

std::optional<JobStatus> job_status_from_name(std::string_view name) {
    if (name == "pending") return JobStatus::pending;
    if (name == "running") return JobStatus::running;
    if (name == "finished") return JobStatus::finished;
    if (name == "crashed") return JobStatus::crashed;
    return std::nullopt;
}

Result<JobStatus> transition(JobStatus current, JobEvent event) {
    if (current == JobStatus::pending && event == JobEvent::start)
        return JobStatus::running;
    if (current == JobStatus::running && event == JobEvent::succeed)
        return JobStatus::finished;
    if (current == JobStatus::running && event == JobEvent::fail)
        return JobStatus::crashed;
    return Error{Err::IllegalTransition,
                 std::string("no transition from ") + job_status_name(current)};
}

const char* component_name(ComponentName c) {
    switch (c) {
        case ComponentName::core_gateway: return "core_gateway";
        case ComponentName::security_engine: return "security_engine";
        case ComponentName::offloading_apis: return "off_loading_apis";
        case ComponentName::analytics_engine: return "analytics_engine";
    }
    return "unknown";
}

ComponentName route_table(JobKind kind) {
    switch (kind) {
        case JobKind::read:
        case JobKind::write:
        case JobKind::update:
        case JobKind::del:
        case JobKind::create_store:
        case JobKind::destroy_store:
        case JobKind::scale_store:
        case JobKind::relocate_store:
        case JobKind::migrate:
        case JobKind::replicate:
        case JobKind::offload:
        case JobKind::publish:
        case JobKind::anonymize:
        case JobKind::encrypt:
            return ComponentName::offloading_apis;
        case JobKind::policy_update:
        case JobKind::access_check:
        case JobKind::protocol_query:
            return ComponentName::security_engine;
        case JobKind::analytics_save:
        case JobKind::analytics_retrieve:
            return ComponentName::analytics_engine;
        case JobKind::status_query:
            return ComponentName::core_gateway;
    }
    return ComponentName::core_gateway;
}

const char* role_name(Role role) {
    switch (role) {
        case Role::application: return "application";
        case Role::admin: return "admin";
        case Role::security_admin: return "security_admin";
        case Role::analytics_module: return "analytics_module";
    }
    return "unknown";
}

std::optional<Role> role_from_name(std::string_view name) {
    if (name == "application") return Role::application;
    if (name == "admin") return Role::admin;
    if (name == "security_admin") return Role::security_admin;
    if (name == "analytics_module") return Role::analytics_module;
    return std::nullopt;
}

json credentials_to_json(const Credentials& creds, bool redact_token) {
    json roles = json::array();
    for (Role r : creds.roles) roles.push_back(role_name(r));
    return json{{"principal_id", creds.principal_id},
                {"token", redact_token ? "<redacted>" : creds.token},
                {"roles", roles}};
}

Result<Credentials> credentials_from_json(const json& j) {
    if (!j.is_object() || !j.contains("principal_id") ||
        !j["principal_id"].is_string())
        return Error{Err::MalformedRequest, "initiator needs principal_id"};
    Credentials c;
    c.principal_id = j["principal_id"].get<std::string>();
    if (c.principal_id.empty())
        return Error{Err::MalformedRequest, "principal_id is empty"};
    if (j.contains("token") && j["token"].is_string())
        c.token = j["token"].get<std::string>();
    if (j.contains("roles")) {
        if (!j["roles"].is_array())
            return Error{Err::MalformedRequest, "roles must be an array"};
        for (const auto& r : j["roles"]) {
            if (!r.is_string())
                return Error{Err::MalformedRequest, "roles must be strings"};
            auto role = role_from_name(r.get<std::string>());
            if (!role)
                return Error{Err::MalformedRequest,
                             "unknown role " + r.get<std::string>()};
            c.roles.insert(*role);
        }
    }
    return c;
}

bool JobData::operator==(const JobData& other) const {
    if (value.index() != other.value.index()) return false;
    if (is_payload()) return payload() == other.payload();
    if (is_result()) return result() == other.result();
    if (is_error())
        return error().code == other.error().code &&
               error().message == other.error().message;
    return true;
}

namespace {

json job_data_to_json(const JobData& data) {
    if (data.is_payload())
        return json{{"payload_b64", base64_encode(data.payload())}};
    if (data.is_result()) return json{{"result", data.result()}};
    if (data.is_error())
        return json{{"error", {{"code", err_name(data.error().code)},
                               {"message", data.error().message}}}};
    return json(nullptr);
}

Result<JobData> job_data_from_json(const json& j) {
    if (j.is_null()) return JobData::none();
    if (!j.is_object())
        return Error{Err::MalformedRequest, "data must be null or object"};
    if (j.contains("payload_b64")) {
        auto bytes = base64_decode(j["payload_b64"].get<std::string>());
        if (!bytes)
            return Error{Err::MalformedRequest, "payload_b64 is not base64"};
        return JobData::payload(std::move(*bytes));
    }
    if (j.contains("result")) return JobData::result(j["result"]);
    if (j.contains("error")) {
        const auto& e = j["error"];
        if (!e.is_object() || !e.contains("code") || !e.contains("message"))
            return Error{Err::MalformedRequest, "error needs code and message"};
        return JobData::error(Error{err_from_name(e["code"].get<std::string>()),
                                    e["message"].get<std::string>()});
    }
    return Error{Err::MalformedRequest, "unrecognized data encoding"};
}

}  // namespace

json job_record_to_json(const JobRecord& record, bool redact_token) {
    return json{{"job_id", record.job_id},
                {"initiator", credentials_to_json(record.initiator, redact_token)},
                {"job_description", job_kind_name(record.job_description)},
                {"job_details", record.job_details},
                {"status", job_status_name(record.status)},
                {"data", job_data_to_json(record.data)},
                {"created_at", record.created_at},
                {"updated_at", record.updated_at}};
}

Result<JobRecord> job_record_from_json(const json& j) {
    if (!j.is_object())
        return Error{Err::MalformedRequest, "job record must be an object"};
    for (const char* field :
         {"job_id", "initiator", "job_description", "job_details", "status"}) {
        if (!j.contains(field))
            return Error{Err::MalformedRequest,
                         std::string("job record missing ") + field};
    }
    JobRecord r;
    r.job_id = j["job_id"].get<std::string>();
    auto creds = credentials_from_json(j["initiator"]);
    if (!creds) return creds.error();
    r.initiator = std::move(creds.value());
    auto kind = job_kind_from_name(j["job_description"].get<std::string>());
    if (!kind)
        return Error{Err::UnknownJobType,
                     "unknown job_description " +
                         j["job_description"].get<std::string>()};
    r.job_description = *kind;
    r.job_details = j["job_details"];
    auto status = job_status_from_name(j["status"].get<std::string>());
    if (!status) return Error{Err::MalformedRequest, "unknown status"};
    r.status = *status;
    auto data = job_data_from_json(j.value("data", json(nullptr)));
    if (!data) return data.error();
    r.data = std::move(data.value());
    r.created_at = j.value("created_at", std::uint64_t{0});
    r.updated_at = j.value("updated_at", std::uint64_t{0});
    return r;
}

namespace {

bool is_nonempty_string(const json& j, const char* field) {
    return j.contains(field) && j[field].is_string() &&
           !j[field].get<std::string>().empty();
}

Status need_string(const json& j, const char* field) {
    if (!is_nonempty_string(j, field))
        return Status(Err::SchemaViolation,
                      std::string("details require string field '") + field + "'");
    return Status::ok_status();
}

Status need_object(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_object())
        return Status(Err::SchemaViolation,
                      std::string("details require object field '") + field + "'");
    return Status::ok_status();
}

// key XOR selector, as every data query addresses either one record or a
// selector match.
Status need_key_or_selector(const json& j) {
    bool has_key = is_nonempty_string(j, "key");
    bool has_selector = j.contains("selector") && j["selector"].is_object();
    if (has_key == has_selector)
        return Status(Err::SchemaViolation,
                      "details require exactly one of 'key' or 'selector'");
    return Status::ok_status();
}

Status need_machine_list(const json& j) {
    if (!j.contains("machines") || !j["machines"].is_array() ||
        j["machines"].empty())
        return Status(Err::SchemaViolation,
                      "details require a non-empty 'machines' list");
    for (const auto& m : j["machines"])
        if (!m.is_string())
            return Status(Err::SchemaViolation, "machines entries must be strings");
    return Status::ok_status();
}

Status need_endpoint_pair(const json& j, const char* field) {
    if (auto s = need_object(j, field); !s.ok()) return s;
    const json& p = j[field];
    if (!is_nonempty_string(p, "store_id") || !is_nonempty_string(p, "collection"))
        return Status(Err::SchemaViolation,
                      std::string("'") + field +
                          "' requires store_id and collection");
    return Status::ok_status();
}

bool is_streaming(const json& j) {
    return j.contains("stream") && j["stream"].is_boolean() &&
           j["stream"].get<bool>();
}

}  // namespace

Status validate_details(JobKind kind, const json& details) {
    if (!details.is_object())
        return Status(Err::SchemaViolation, "job_details must be an object");
    const json& d = details;
    switch (kind) {
        case JobKind::read:
        case JobKind::del: {
            if (auto s = need_string(d, "store_id"); !s.ok()) return s;
            return need_key_or_selector(d);
        }
        case JobKind::write:
        case JobKind::update: {
            if (auto s = need_string(d, "store_id"); !s.ok()) return s;
            if (auto s = need_string(d, "key"); !s.ok()) return s;
            if (!is_streaming(d)) {
                if (!d.contains("value_b64") || !d["value_b64"].is_string())
                    return Status(Err::SchemaViolation,
                                  "write/update require value_b64 unless streaming");
                if (!base64_decode(d["value_b64"].get<std::string>()))
                    return Status(Err::SchemaViolation, "value_b64 is not base64");
            }
            return Status::ok_status();
        }
        case JobKind::create_store: {
            if (!is_nonempty_string(d, "kind") ||
                (d["kind"] != "key_value" && d["kind"] != "document" &&
                 d["kind"] != "tabular"))
                return Status(Err::SchemaViolation,
                              "create_store requires kind in "
                              "{key_value, document, tabular}");
            if (auto s = need_string(d, "provider_id"); !s.ok()) return s;
            return need_machine_list(d);
        }
        case JobKind::destroy_store:
        case JobKind::offload:
            return need_string(d, "store_id");
        case JobKind::scale_store: {
            if (auto s = need_string(d, "store_id"); !s.ok()) return s;
            return need_machine_list(d);
        }
        case JobKind::relocate_store: {
            if (auto s = need_string(d, "store_id"); !s.ok()) return s;
            return need_string(d, "new_provider");
        }
        case JobKind::migrate:
        case JobKind::replicate: {
            if (auto s = need_endpoint_pair(d, "src"); !s.ok()) return s;
            if (auto s = need_endpoint_pair(d, "dst"); !s.ok()) return s;
            if (kind == JobKind::replicate) {
                if (!is_nonempty_string(d, "mode") ||
                    (d["mode"] != "one_shot" && d["mode"] != "continuous"))
                    return Status(Err::SchemaViolation,
                                  "replicate requires mode in {one_shot, continuous}");
            }
            return Status::ok_status();
        }
        case JobKind::publish: {
            if (auto s = need_string(d, "dataset_id"); !s.ok()) return s;
            if (!d.contains("audience") || !d["audience"].is_array())
                return Status(Err::SchemaViolation,
                              "publish requires an 'audience' array");
            for (const auto& a : d["audience"])
                if (!a.is_string())
                    return Status(Err::SchemaViolation,
                                  "audience entries must be principal ids");
            return Status::ok_status();
        }
        case JobKind::anonymize:
        case JobKind::encrypt:
            return need_string(d, "dataset_id");
        case JobKind::policy_update:
            return need_object(d, "update");
        case JobKind::access_check: {
            if (auto s = need_string(d, "dataset_id"); !s.ok()) return s;
            if (!is_nonempty_string(d, "action") ||
                (d["action"] != "read" && d["action"] != "write" &&
                 d["action"] != "admin"))
                return Status(Err::SchemaViolation,
                              "access_check requires action in {read, write, admin}");
            return Status::ok_status();
        }
        case JobKind::protocol_query: {
            if (!is_nonempty_string(d, "data_class") ||
                (d["data_class"] != "federation" && d["data_class"] != "monitoring" &&
                 d["data_class"] != "application"))
                return Status(Err::SchemaViolation,
                              "protocol_query requires data_class in "
                              "{federation, monitoring, application}");
            return Status::ok_status();
        }
        case JobKind::analytics_save: {
            if (auto s = need_string(d, "dataset_id"); !s.ok()) return s;
            if (auto s = need_object(d, "description"); !s.ok()) return s;
            if (!is_streaming(d)) {
                if (!d.contains("records") || !d["records"].is_array())
                    return Status(Err::SchemaViolation,
                                  "analytics_save requires 'records' unless streaming");
            }
            return Status::ok_status();
        }
        case JobKind::analytics_retrieve:
            return need_object(d, "description");
        case JobKind::status_query:
            return need_string(d, "job_id");
    }
    return Status(Err::SchemaViolation, "unhandled job kind");
}

Result<JobRecord> parse_job_request(const json& raw) {
    if (!raw.is_object())
        return Error{Err::MalformedRequest, "request must be a JSON object"};
    if (!raw.contains("initiator"))
        return Error{Err::MalformedRequest, "request missing initiator"};
    if (!raw.contains("job_description") || !raw["job_description"].is_string())
        return Error{Err::MalformedRequest, "request missing job_description"};

    auto creds = credentials_from_json(raw["initiator"]);
    if (!creds) return creds.error();

    auto kind = job_kind_from_name(raw["job_description"].get<std::string>());
    if (!kind)
        return Error{Err::UnknownJobType,
                     "unknown job type " +
                         raw["job_description"].get<std::string>()};

    json details = raw.value("job_details", json::object());
    if (auto s = validate_details(*kind, details); !s.ok()) return s.error();

    JobRecord record;
    record.job_id = next_job_id();
    record.initiator = std::move(creds.value());
    record.job_description = *kind;
    record.job_details = std::move(details);
    record.status = JobStatus::pending;
    return record;
}

std::string next_job_id() {
    static std::atomic<std::uint64_t> counter{0};
    return "j-" + std::to_string(counter.fetch_add(1) + 1);
}

}  // namespace budamaf::protocol
