#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "budamaf/bytes.hpp"
#include "budamaf/protocol.hpp"
#include "budamaf/result.hpp"

namespace budamaf::security {

using json = nlohmann::json;

enum class DataClass { federation, monitoring, application };

const char* data_class_name(DataClass c);
std::optional<DataClass> data_class_from_name(std::string_view name);

enum class AclAction { read, write, admin };

const char* acl_action_name(AclAction a);
std::optional<AclAction> acl_action_from_name(std::string_view name);

// Protection protocols required for one data class. Federation and
// monitoring data keep integrity preservation only; application data is
// masked and encrypted under the default policy.
struct ProtocolSet {
    bool integrity = true;
    bool anonymize = false;
    bool encrypt = false;
    std::vector<std::string> anonymize_fields;

    bool operator==(const ProtocolSet&) const = default;
};

json protocol_set_to_json(const ProtocolSet& p);
Result<ProtocolSet> protocol_set_from_json(const json& j);

struct AccessDecision {
    bool allowed = false;
    ProtocolSet protocols;
    std::string reason;
};

enum class AuditAction { read_policy, modify_policy, access_check, revoke };

const char* audit_action_name(AuditAction a);

struct AuditLogEntry {
    protocol::Credentials initiator;  // token redacted at construction
    AuditAction action = AuditAction::read_policy;
    std::string subject;
    std::uint64_t timestamp = 0;
};

json audit_entry_to_json(const AuditLogEntry& e);

struct DatasetInfo {
    std::string owner;
    DataClass data_class = DataClass::application;
};

// Centralized security and privacy authority. Owns the versioned policy
// document (class protocols + per-dataset ACL + dataset registry), the
// append-only audit log, the per-owner transform keys and the anonymization
// salt. Many concurrent readers, one writer at a time; readers observe
// whole-version snapshots.
class SecurityEngine {
public:
    struct Options {
        std::string policy_path;     // versioned policy document, atomically swapped
        std::string audit_log_path;  // live NDJSON export, appended per entry
        std::uint64_t seed = 0x5ec5eed;
    };

    SecurityEngine();
    explicit SecurityEngine(Options opts);

    ProtocolSet protocol_query(DataClass cls, const protocol::Credentials& initiator,
                               const std::string& owner = "");

    Result<AccessDecision> check_access(const protocol::Credentials& creds,
                                        const std::string& dataset_id,
                                        AclAction action);

    // Merges class-protocol changes; requires the security_admin role.
    // Federation and monitoring protocols are fixed by invariant.
    Result<std::uint64_t> policy_update(const protocol::Credentials& creds,
                                        const json& update);

    // Strips every non-owner grant on the dataset.
    Status revoke(const protocol::Credentials& creds, const std::string& dataset_id);

    // Total, fail-closed: anything without a valid declared class is
    // application data.
    DataClass classify(const json& metadata) const;

    // Dataset registry. First write of a dataset registers it with the
    // writing principal as owner; the owner axiom (read/write/admin) is
    // implicit and irrevocable.
    Status ensure_dataset(const std::string& dataset_id, const std::string& owner,
                          const json& metadata,
                          const protocol::Credentials& initiator);
    Status grant(const protocol::Credentials& creds, const std::string& dataset_id,
                 AclAction action, const std::vector<std::string>& principals);
    Status drop_dataset(const protocol::Credentials& creds,
                        const std::string& dataset_id);
    std::optional<DatasetInfo> dataset(const std::string& dataset_id) const;

    std::uint64_t policy_version() const;
    std::size_t audit_size() const;
    std::vector<AuditLogEntry> audit_entries() const;
    Status export_audit_log(const std::string& path) const;

    // --- payload transform pipeline -------------------------------------
    // Applies the decision's protocols to a plaintext payload and returns
    // the envelope bytes handed to storage. The envelope carries the
    // tamper-evident marker checked at the wrapper boundary in test builds.
    Result<Bytes> enforce_payload(const std::string& dataset_id, DataClass cls,
                                  const ProtocolSet& protocols,
                                  const Bytes& plaintext);

    // Inverse path: verifies the content digest, checks the authentication
    // tag and decrypts for authorized readers. Anonymization is not
    // invertible; masked fields stay masked.
    Result<Bytes> recover_payload(const Bytes& stored) const;

    // Digest verification only (no key material needed).
    Status verify_payload(const Bytes& stored) const;

    static bool is_enforced_payload(const Bytes& stored);

private:
    struct PolicyState {
        std::map<DataClass, ProtocolSet> class_protocols;
        // dataset -> action -> principals
        std::map<std::string, std::map<AclAction, std::set<std::string>>> acl;
        std::map<std::string, DatasetInfo> datasets;
        std::uint64_t version = 1;
    };

    void append_audit(const protocol::Credentials& initiator, AuditAction action,
                      std::string subject);
    void persist_policy_locked();
    void load_policy_file();
    Bytes owner_key(const std::string& owner);
    json policy_to_json_locked() const;

    Options opts_;
    mutable std::mutex mu_;
    std::shared_ptr<const PolicyState> policy_;

    mutable std::mutex audit_mu_;
    std::vector<AuditLogEntry> audit_;
    std::uint64_t audit_seq_ = 0;

    mutable std::mutex key_mu_;
    std::map<std::string, Bytes> owner_keys_;
    Bytes anon_salt_;
    std::uint64_t nonce_counter_ = 0;
    std::uint64_t seed_ = 0;
};

}  // namespace budamaf::security
