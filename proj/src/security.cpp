#include "budamaf/security.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "budamaf/digest.hpp"

namespace budamaf::security {

namespace {

constexpr const char* kEnvelopeMarker = "_bdmf";

ProtocolSet fixed_low_sensitivity_protocols() {
    return ProtocolSet{true, false, false, {}};
}

std::map<DataClass, ProtocolSet> default_class_protocols() {
    return {
        {DataClass::federation, fixed_low_sensitivity_protocols()},
        {DataClass::monitoring, fixed_low_sensitivity_protocols()},
        {DataClass::application, ProtocolSet{true, true, true, {}}},
    };
}

protocol::Credentials redacted(const protocol::Credentials& c) {
    protocol::Credentials out = c;
    out.token = "<redacted>";
    return out;
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng() & 0xff);
    return out;
}

// Keystream cipher: block i = SHA-256(key || nonce || i). Reference
// transform only; real deployments plug in their own.
Bytes xor_keystream(const Bytes& key, const Bytes& nonce, const Bytes& input) {
    Bytes out(input.size());
    Bytes block_input;
    for (std::size_t off = 0; off < input.size(); off += 32) {
        block_input = key;
        block_input.insert(block_input.end(), nonce.begin(), nonce.end());
        std::uint64_t counter = off / 32;
        for (int i = 0; i < 8; ++i)
            block_input.push_back(static_cast<std::uint8_t>(counter >> (8 * i)));
        Digest256 ks = sha256(block_input);
        for (std::size_t i = off; i < std::min(off + 32, input.size()); ++i)
            out[i] = input[i] ^ ks[i - off];
    }
    return out;
}

}  // namespace

const char* data_class_name(DataClass c) {
    switch (c) {
        case DataClass::federation: return "federation";
        case DataClass::monitoring: return "monitoring";
        case DataClass::application: return "application";
    }
    return "application";
}

std::optional<DataClass> data_class_from_name(std::string_view name) {
    if (name == "federation") return DataClass::federation;
    if (name == "monitoring") return DataClass::monitoring;
    if (name == "application") return DataClass::application;
    return std::nullopt;
}

const char* acl_action_name(AclAction a) {
    switch (a) {
        case AclAction::read: return "read";
        case AclAction::write: return "write";
        case AclAction::admin: return "admin";
    }
    return "read";
}

std::optional<AclAction> acl_action_from_name(std::string_view name) {
    if (name == "read") return AclAction::read;
    if (name == "write") return AclAction::write;
    if (name == "admin") return AclAction::admin;
    return std::nullopt;
}

const char* audit_action_name(AuditAction a) {
    switch (a) {
        case AuditAction::read_policy: return "read_policy";
        case AuditAction::modify_policy: return "modify_policy";
        case AuditAction::access_check: return "access_check";
        case AuditAction::revoke: return "revoke";
    }
    return "read_policy";
}

json protocol_set_to_json(const ProtocolSet& p) {
    return json{{"integrity", p.integrity},
                {"anonymize", p.anonymize},
                {"encrypt", p.encrypt},
                {"anonymize_fields", p.anonymize_fields}};
}

Result<ProtocolSet> protocol_set_from_json(const json& j) {
    if (!j.is_object())
        return Error{Err::InvalidPolicy, "protocol set must be an object"};
    ProtocolSet p;
    for (const char* field : {"integrity", "anonymize", "encrypt"}) {
        if (j.contains(field) && !j[field].is_boolean())
            return Error{Err::InvalidPolicy,
                         std::string(field) + " must be a boolean"};
    }
    p.integrity = j.value("integrity", true);
    p.anonymize = j.value("anonymize", false);
    p.encrypt = j.value("encrypt", false);
    if (j.contains("anonymize_fields")) {
        if (!j["anonymize_fields"].is_array())
            return Error{Err::InvalidPolicy, "anonymize_fields must be an array"};
        for (const auto& f : j["anonymize_fields"]) {
            if (!f.is_string())
                return Error{Err::InvalidPolicy, "anonymize_fields must be strings"};
            p.anonymize_fields.push_back(f.get<std::string>());
        }
    }
    return p;
}

json audit_entry_to_json(const AuditLogEntry& e) {
    return json{{"initiator", protocol::credentials_to_json(e.initiator, true)},
                {"action", audit_action_name(e.action)},
                {"subject", e.subject},
                {"timestamp", e.timestamp}};
}

SecurityEngine::SecurityEngine() : SecurityEngine(Options{}) {}

SecurityEngine::SecurityEngine(Options opts) : opts_(std::move(opts)) {
    auto state = std::make_shared<PolicyState>();
    state->class_protocols = default_class_protocols();
    policy_ = state;
    seed_ = opts_.seed;
    std::mt19937_64 rng(seed_);
    anon_salt_ = random_bytes(rng, 16);
    nonce_counter_ = 0;
    if (!opts_.policy_path.empty()) load_policy_file();
}

void SecurityEngine::append_audit(const protocol::Credentials& initiator,
                                  AuditAction action, std::string subject) {
    std::lock_guard lk(audit_mu_);
    AuditLogEntry e{redacted(initiator), action, std::move(subject), ++audit_seq_};
    if (!opts_.audit_log_path.empty()) {
        std::ofstream out(opts_.audit_log_path, std::ios::app);
        if (out) out << audit_entry_to_json(e).dump() << '\n';
    }
    audit_.push_back(std::move(e));
}

ProtocolSet SecurityEngine::protocol_query(DataClass cls,
                                           const protocol::Credentials& initiator,
                                           const std::string& owner) {
    std::shared_ptr<const PolicyState> state;
    {
        std::lock_guard lk(mu_);
        state = policy_;
    }
    std::string subject = std::string("class=") + data_class_name(cls);
    if (!owner.empty()) subject += " owner=" + owner;
    append_audit(initiator, AuditAction::read_policy, subject);
    auto it = state->class_protocols.find(cls);
    return it == state->class_protocols.end() ? ProtocolSet{} : it->second;
}

Result<AccessDecision> SecurityEngine::check_access(
    const protocol::Credentials& creds, const std::string& dataset_id,
    AclAction action) {
    std::shared_ptr<const PolicyState> state;
    {
        std::lock_guard lk(mu_);
        state = policy_;
    }
    append_audit(creds, AuditAction::access_check,
                 dataset_id + ":" + acl_action_name(action));

    auto ds = state->datasets.find(dataset_id);
    if (ds == state->datasets.end())
        return Error{Err::UnknownDataset, "dataset " + dataset_id + " not registered"};

    AccessDecision decision;
    auto protos = state->class_protocols.find(ds->second.data_class);
    if (protos != state->class_protocols.end()) decision.protocols = protos->second;

    if (ds->second.owner == creds.principal_id) {
        decision.allowed = true;
        decision.reason = "owner";
        return decision;
    }
    auto acl = state->acl.find(dataset_id);
    if (acl != state->acl.end()) {
        auto grants = acl->second.find(action);
        if (grants != acl->second.end() &&
            grants->second.count(creds.principal_id) > 0) {
            decision.allowed = true;
            decision.reason = "granted";
            return decision;
        }
    }
    decision.allowed = false;
    decision.reason = "no grant";
    return decision;
}

Result<std::uint64_t> SecurityEngine::policy_update(
    const protocol::Credentials& creds, const json& update) {
    if (!creds.has_role(protocol::Role::security_admin)) {
        append_audit(creds, AuditAction::modify_policy, "denied: missing role");
        return Error{Err::AccessDenied, "policy_update requires security_admin"};
    }
    if (!update.is_object()) {
        append_audit(creds, AuditAction::modify_policy, "denied: bad document");
        return Error{Err::InvalidPolicy, "update must be an object"};
    }

    std::lock_guard lk(mu_);
    auto next = std::make_shared<PolicyState>(*policy_);
    if (update.contains("class_protocols")) {
        const json& cp = update["class_protocols"];
        if (!cp.is_object()) {
            append_audit(creds, AuditAction::modify_policy, "denied: bad document");
            return Error{Err::InvalidPolicy, "class_protocols must be an object"};
        }
        for (auto it = cp.begin(); it != cp.end(); ++it) {
            auto cls = data_class_from_name(it.key());
            if (!cls) {
                append_audit(creds, AuditAction::modify_policy,
                             "denied: unknown class " + it.key());
                return Error{Err::InvalidPolicy, "unknown data class " + it.key()};
            }
            auto parsed = protocol_set_from_json(it.value());
            if (!parsed) {
                append_audit(creds, AuditAction::modify_policy, "denied: bad protocols");
                return parsed.error();
            }
            if (*cls != DataClass::application &&
                !(parsed.value() == fixed_low_sensitivity_protocols())) {
                append_audit(creds, AuditAction::modify_policy,
                             "denied: fixed class " + it.key());
                return Error{Err::InvalidPolicy,
                             std::string(data_class_name(*cls)) +
                                 " protocols are fixed to integrity preservation"};
            }
            next->class_protocols[*cls] = std::move(parsed.value());
        }
    }
    next->version = policy_->version + 1;
    policy_ = next;
    persist_policy_locked();
    append_audit(creds, AuditAction::modify_policy,
                 "version=" + std::to_string(next->version));
    return next->version;
}

Status SecurityEngine::revoke(const protocol::Credentials& creds,
                              const std::string& dataset_id) {
    std::lock_guard lk(mu_);
    auto ds = policy_->datasets.find(dataset_id);
    if (ds == policy_->datasets.end()) {
        append_audit(creds, AuditAction::revoke, "denied: unknown " + dataset_id);
        return Status(Err::UnknownDataset, "dataset " + dataset_id + " not registered");
    }
    if (ds->second.owner != creds.principal_id &&
        !creds.has_role(protocol::Role::security_admin)) {
        append_audit(creds, AuditAction::revoke, "denied: " + dataset_id);
        return Status(Err::AccessDenied, "revoke requires owner or security_admin");
    }
    auto next = std::make_shared<PolicyState>(*policy_);
    next->acl.erase(dataset_id);
    next->version = policy_->version + 1;
    policy_ = next;
    persist_policy_locked();
    append_audit(creds, AuditAction::revoke, dataset_id);
    return Status::ok_status();
}

DataClass SecurityEngine::classify(const json& metadata) const {
    if (metadata.is_object() && metadata.contains("data_class") &&
        metadata["data_class"].is_string()) {
        if (auto cls = data_class_from_name(metadata["data_class"].get<std::string>()))
            return *cls;
    }
    return DataClass::application;
}

Status SecurityEngine::ensure_dataset(const std::string& dataset_id,
                                      const std::string& owner,
                                      const json& metadata,
                                      const protocol::Credentials& initiator) {
    std::lock_guard lk(mu_);
    if (policy_->datasets.count(dataset_id) > 0) return Status::ok_status();
    auto next = std::make_shared<PolicyState>(*policy_);
    next->datasets[dataset_id] = DatasetInfo{owner, classify(metadata)};
    next->version = policy_->version + 1;
    policy_ = next;
    persist_policy_locked();
    append_audit(initiator, AuditAction::modify_policy,
                 "register dataset " + dataset_id);
    return Status::ok_status();
}

Status SecurityEngine::grant(const protocol::Credentials& creds,
                             const std::string& dataset_id, AclAction action,
                             const std::vector<std::string>& principals) {
    std::lock_guard lk(mu_);
    auto ds = policy_->datasets.find(dataset_id);
    if (ds == policy_->datasets.end()) {
        append_audit(creds, AuditAction::modify_policy,
                     "denied: unknown " + dataset_id);
        return Status(Err::UnknownDataset, "dataset " + dataset_id + " not registered");
    }
    if (ds->second.owner != creds.principal_id &&
        !creds.has_role(protocol::Role::security_admin)) {
        append_audit(creds, AuditAction::modify_policy, "denied: " + dataset_id);
        return Status(Err::AccessDenied, "grant requires owner or security_admin");
    }
    auto next = std::make_shared<PolicyState>(*policy_);
    for (const auto& p : principals) next->acl[dataset_id][action].insert(p);
    next->version = policy_->version + 1;
    policy_ = next;
    persist_policy_locked();
    append_audit(creds, AuditAction::modify_policy,
                 "grant " + dataset_id + ":" + acl_action_name(action));
    return Status::ok_status();
}

Status SecurityEngine::drop_dataset(const protocol::Credentials& creds,
                                    const std::string& dataset_id) {
    std::lock_guard lk(mu_);
    auto ds = policy_->datasets.find(dataset_id);
    if (ds == policy_->datasets.end()) {
        append_audit(creds, AuditAction::revoke, "denied: unknown " + dataset_id);
        return Status(Err::UnknownDataset, "dataset " + dataset_id + " not registered");
    }
    if (ds->second.owner != creds.principal_id &&
        !creds.has_role(protocol::Role::security_admin)) {
        append_audit(creds, AuditAction::revoke, "denied: " + dataset_id);
        return Status(Err::AccessDenied, "drop requires owner or security_admin");
    }
    auto next = std::make_shared<PolicyState>(*policy_);
    next->acl.erase(dataset_id);
    next->datasets.erase(dataset_id);
    next->version = policy_->version + 1;
    policy_ = next;
    persist_policy_locked();
    append_audit(creds, AuditAction::revoke, "drop dataset " + dataset_id);
    return Status::ok_status();
}

std::optional<DatasetInfo> SecurityEngine::dataset(
    const std::string& dataset_id) const {
    std::lock_guard lk(mu_);
    auto it = policy_->datasets.find(dataset_id);
    if (it == policy_->datasets.end()) return std::nullopt;
    return it->second;
}

std::uint64_t SecurityEngine::policy_version() const {
    std::lock_guard lk(mu_);
    return policy_->version;
}

std::size_t SecurityEngine::audit_size() const {
    std::lock_guard lk(audit_mu_);
    return audit_.size();
}

std::vector<AuditLogEntry> SecurityEngine::audit_entries() const {
    std::lock_guard lk(audit_mu_);
    return audit_;
}

Status SecurityEngine::export_audit_log(const std::string& path) const {
    std::lock_guard lk(audit_mu_);
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        return Status(Err::InternalError, "cannot open audit export path " + path);
    for (const auto& e : audit_) out << audit_entry_to_json(e).dump() << '\n';
    return Status::ok_status();
}

json SecurityEngine::policy_to_json_locked() const {
    json cp = json::object();
    for (const auto& [cls, protos] : policy_->class_protocols)
        cp[data_class_name(cls)] = protocol_set_to_json(protos);
    json acl = json::object();
    for (const auto& [dataset, actions] : policy_->acl) {
        json per_action = json::object();
        for (const auto& [action, principals] : actions)
            per_action[acl_action_name(action)] =
                std::vector<std::string>(principals.begin(), principals.end());
        acl[dataset] = per_action;
    }
    json datasets = json::object();
    for (const auto& [id, info] : policy_->datasets)
        datasets[id] = json{{"owner", info.owner},
                            {"data_class", data_class_name(info.data_class)}};
    return json{{"version", policy_->version},
                {"class_protocols", cp},
                {"acl", acl},
                {"datasets", datasets}};
}

void SecurityEngine::persist_policy_locked() {
    if (opts_.policy_path.empty()) return;
    std::string tmp = opts_.policy_path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) return;
        out << policy_to_json_locked().dump(2) << '\n';
    }
    std::rename(tmp.c_str(), opts_.policy_path.c_str());
}

void SecurityEngine::load_policy_file() {
    std::ifstream in(opts_.policy_path);
    if (!in) return;
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return;
    auto state = std::make_shared<PolicyState>();
    state->class_protocols = default_class_protocols();
    state->version = doc.value("version", std::uint64_t{1});
    if (doc.contains("class_protocols") && doc["class_protocols"].is_object()) {
        for (auto it = doc["class_protocols"].begin();
             it != doc["class_protocols"].end(); ++it) {
            auto cls = data_class_from_name(it.key());
            auto protos = protocol_set_from_json(it.value());
            if (cls && protos) state->class_protocols[*cls] = protos.value();
        }
    }
    if (doc.contains("acl") && doc["acl"].is_object()) {
        for (auto ds = doc["acl"].begin(); ds != doc["acl"].end(); ++ds) {
            for (auto ac = ds.value().begin(); ac != ds.value().end(); ++ac) {
                auto action = acl_action_from_name(ac.key());
                if (!action || !ac.value().is_array()) continue;
                for (const auto& p : ac.value())
                    if (p.is_string())
                        state->acl[ds.key()][*action].insert(p.get<std::string>());
            }
        }
    }
    if (doc.contains("datasets") && doc["datasets"].is_object()) {
        for (auto it = doc["datasets"].begin(); it != doc["datasets"].end(); ++it) {
            DatasetInfo info;
            info.owner = it.value().value("owner", "");
            auto cls = data_class_from_name(it.value().value("data_class", ""));
            info.data_class = cls.value_or(DataClass::application);
            state->datasets[it.key()] = info;
        }
    }
    std::lock_guard lk(mu_);
    policy_ = state;
}

Bytes SecurityEngine::owner_key(const std::string& owner) {
    std::lock_guard lk(key_mu_);
    auto it = owner_keys_.find(owner);
    if (it != owner_keys_.end()) return it->second;
    std::mt19937_64 rng(seed_ ^ std::hash<std::string>{}(owner));
    Bytes key = random_bytes(rng, 32);
    owner_keys_[owner] = key;
    return key;
}

namespace {

// Digest covers everything that determines how the body is interpreted, so
// flag stripping is detected along with body tampering.
std::string envelope_digest(const std::string& dataset, const std::string& cls,
                            bool anonymized, bool encrypted,
                            const std::string& nonce_hex, const Bytes& body) {
    Bytes material = to_bytes(dataset + "|" + cls + "|" +
                              (anonymized ? "a1" : "a0") +
                              (encrypted ? "e1" : "e0") + "|" + nonce_hex + "|");
    material.insert(material.end(), body.begin(), body.end());
    return sha256_hex(material);
}

}  // namespace

Result<Bytes> SecurityEngine::enforce_payload(const std::string& dataset_id,
                                              DataClass cls,
                                              const ProtocolSet& protocols,
                                              const Bytes& plaintext) {
    Bytes body = plaintext;
    bool anonymized = false;

    if (protocols.anonymize && !protocols.anonymize_fields.empty()) {
        json doc = json::parse(to_string(body), nullptr, false);
        if (doc.is_object()) {
            for (const auto& field : protocols.anonymize_fields) {
                if (!doc.contains(field)) continue;
                Bytes material = anon_salt_;
                std::string original = doc[field].dump();
                material.insert(material.end(), original.begin(), original.end());
                doc[field] = "anon:" + sha256_hex(material);
                anonymized = true;
            }
            if (anonymized) body = to_bytes(doc.dump());
        }
    }

    std::string owner;
    if (auto info = dataset(dataset_id)) owner = info->owner;

    std::string nonce_hex;
    std::string tag_hex;
    if (protocols.encrypt) {
        if (owner.empty())
            return Error{Err::TransformFailure,
                         "no registered owner key for dataset " + dataset_id};
        Bytes key = owner_key(owner);
        Bytes nonce;
        {
            std::lock_guard lk(key_mu_);
            std::mt19937_64 rng(seed_ ^ (++nonce_counter_));
            nonce = random_bytes(rng, 16);
        }
        nonce_hex = hex_encode(nonce);
        body = xor_keystream(key, nonce, body);
        Bytes mac_input = nonce;
        mac_input.insert(mac_input.end(), body.begin(), body.end());
        Digest256 tag = hmac_sha256(key, mac_input);
        tag_hex = hex_encode(Bytes(tag.begin(), tag.end()));
    }

    json env{{kEnvelopeMarker, 1},
             {"dataset", dataset_id},
             {"owner", owner},
             {"class", data_class_name(cls)},
             {"anonymized", anonymized},
             {"encrypted", protocols.encrypt},
             {"nonce", nonce_hex},
             {"tag", tag_hex},
             {"body_b64", base64_encode(body)}};
    env["digest"] = envelope_digest(dataset_id, data_class_name(cls), anonymized,
                                    protocols.encrypt, nonce_hex, body);
    return to_bytes(env.dump());
}

namespace {

Result<json> parse_envelope(const Bytes& stored) {
    json env = json::parse(to_string(stored), nullptr, false);
    if (env.is_discarded() || !env.is_object() || !env.contains(kEnvelopeMarker))
        return Error{Err::IntegrityViolation,
                     "stored bytes are not an enforced payload"};
    for (const char* field : {"dataset", "class", "digest", "body_b64"})
        if (!env.contains(field))
            return Error{Err::IntegrityViolation, "envelope missing fields"};
    return env;
}

Result<Bytes> verified_body(const json& env) {
    auto body = base64_decode(env["body_b64"].get<std::string>());
    if (!body) return Error{Err::IntegrityViolation, "envelope body corrupted"};
    std::string expect = envelope_digest(
        env["dataset"].get<std::string>(), env["class"].get<std::string>(),
        env.value("anonymized", false), env.value("encrypted", false),
        env.value("nonce", std::string{}), *body);
    if (expect != env["digest"].get<std::string>())
        return Error{Err::IntegrityViolation, "content digest mismatch"};
    return *body;
}

}  // namespace

bool SecurityEngine::is_enforced_payload(const Bytes& stored) {
    return parse_envelope(stored).ok();
}

Status SecurityEngine::verify_payload(const Bytes& stored) const {
    auto env = parse_envelope(stored);
    if (!env) return env.error();
    auto body = verified_body(env.value());
    if (!body) return body.error();
    return Status::ok_status();
}

Result<Bytes> SecurityEngine::recover_payload(const Bytes& stored) const {
    auto env = parse_envelope(stored);
    if (!env) return env.error();
    auto body = verified_body(env.value());
    if (!body) return body.error();

    if (!env.value().value("encrypted", false)) return body.value();

    std::string owner = env.value().value("owner", "");
    Bytes key;
    {
        std::lock_guard lk(key_mu_);
        auto it = owner_keys_.find(owner);
        if (it == owner_keys_.end())
            return Error{Err::TransformFailure, "no key held for owner " + owner};
        key = it->second;
    }
    auto nonce = hex_decode(env.value().value("nonce", std::string{}));
    if (!nonce) return Error{Err::IntegrityViolation, "bad nonce"};
    Bytes nonce_bytes = std::move(*nonce);
    Bytes mac_input = nonce_bytes;
    mac_input.insert(mac_input.end(), body.value().begin(), body.value().end());
    Digest256 tag = hmac_sha256(key, mac_input);
    if (hex_encode(Bytes(tag.begin(), tag.end())) !=
        env.value().value("tag", std::string{}))
        return Error{Err::IntegrityViolation, "authentication tag mismatch"};
    return xor_keystream(key, nonce_bytes, body.value());
}

}  // namespace budamaf::security
