#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "budamaf/bytes.hpp"
#include "budamaf/result.hpp"

namespace budamaf::protocol {

using json = nlohmann::json;

// Every request entering the gateway is one of these jobs. The token set is
// closed; the routing table below must stay total over it.
enum class JobKind {
    read,
    write,
    update,
    del,
    create_store,
    destroy_store,
    scale_store,
    relocate_store,
    migrate,
    replicate,
    offload,
    publish,
    anonymize,
    encrypt,
    policy_update,
    access_check,
    protocol_query,
    analytics_save,
    analytics_retrieve,
    status_query,
};

constexpr JobKind kAllJobKinds[] = {
    JobKind::read,          JobKind::write,
    JobKind::update,        JobKind::del,
    JobKind::create_store,  JobKind::destroy_store,
    JobKind::scale_store,   JobKind::relocate_store,
    JobKind::migrate,       JobKind::replicate,
    JobKind::offload,       JobKind::publish,
    JobKind::anonymize,     JobKind::encrypt,
    JobKind::policy_update, JobKind::access_check,
    JobKind::protocol_query, JobKind::analytics_save,
    JobKind::analytics_retrieve, JobKind::status_query,
};

const char* job_kind_name(JobKind kind);
std::optional<JobKind> job_kind_from_name(std::string_view name);

enum class JobStatus { pending, running, finished, crashed };

const char* job_status_name(JobStatus status);
std::optional<JobStatus> job_status_from_name(std::string_view name);

inline bool is_terminal(JobStatus s) {
    return s == JobStatus::finished || s == JobStatus::crashed;
}

enum class JobEvent { start, succeed, fail };

// The only legal edges are pending+start -> running,
// running+succeed -> finished and running+fail -> crashed.
Result<JobStatus> transition(JobStatus current, JobEvent event);

enum class ComponentName {
    core_gateway,
    security_engine,
    offloading_apis,
    analytics_engine,
};

const char* component_name(ComponentName c);

// Total routing function: which component executes a job of this kind.
ComponentName route_table(JobKind kind);

enum class Role { application, admin, security_admin, analytics_module };

const char* role_name(Role role);
std::optional<Role> role_from_name(std::string_view name);

struct Credentials {
    std::string principal_id;
    std::string token;
    std::set<Role> roles;

    bool has_role(Role r) const { return roles.count(r) > 0; }
    bool operator==(const Credentials&) const = default;
};

json credentials_to_json(const Credentials& creds, bool redact_token = false);
Result<Credentials> credentials_from_json(const json& j);

// data member of a job: insertion payload, retrieval result, or the error
// description. The error alternative is present iff status == crashed.
struct JobData {
    struct None {
        bool operator==(const None&) const = default;
    };
    using Value = std::variant<None, Bytes, json, Error>;

    Value value = None{};

    bool is_none() const { return std::holds_alternative<None>(value); }
    bool is_payload() const { return std::holds_alternative<Bytes>(value); }
    bool is_result() const { return std::holds_alternative<json>(value); }
    bool is_error() const { return std::holds_alternative<Error>(value); }

    const Bytes& payload() const { return std::get<Bytes>(value); }
    const json& result() const { return std::get<json>(value); }
    const Error& error() const { return std::get<Error>(value); }

    static JobData none() { return JobData{}; }
    static JobData payload(Bytes b) { return JobData{std::move(b)}; }
    static JobData result(json j) { return JobData{std::move(j)}; }
    static JobData error(Error e) { return JobData{std::move(e)}; }

    bool operator==(const JobData& other) const;
};

struct JobRecord {
    std::string job_id;
    Credentials initiator;
    JobKind job_description = JobKind::read;
    json job_details = json::object();
    JobStatus status = JobStatus::pending;
    JobData data;
    std::uint64_t created_at = 0;
    std::uint64_t updated_at = 0;
};

json job_record_to_json(const JobRecord& record, bool redact_token = false);
Result<JobRecord> job_record_from_json(const json& j);

// Validates job_details against the per-kind schema documented in
// docs/protocol.md.
Status validate_details(JobKind kind, const json& details);

// Parses a submitted request document into a pending JobRecord with a fresh
// gateway-assigned job id. The initiator token is not verified here.
Result<JobRecord> parse_job_request(const json& raw);

// Process-wide job id source; ids are unique for the gateway's lifetime.
std::string next_job_id();

}  // namespace budamaf::protocol
