#include "budamaf/wrapper.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <shared_mutex>

#include "budamaf/digest.hpp"

namespace budamaf::wrappers {

const char* store_kind_name(StoreKind kind) {
    switch (kind) {
        case StoreKind::key_value: return "key_value";
        case StoreKind::document: return "document";
        case StoreKind::tabular: return "tabular";
    }
    return "key_value";
}

std::optional<StoreKind> store_kind_from_name(std::string_view name) {
    if (name == "key_value") return StoreKind::key_value;
    if (name == "document") return StoreKind::document;
    if (name == "tabular") return StoreKind::tabular;
    return std::nullopt;
}

json capability_set_to_json(const CapabilitySet& c) {
    return json{{"transactions", c.transactions}, {"scan", c.scan}, {"stream", c.stream}};
}

CapabilitySet capability_set_from_json(const json& j) {
    CapabilitySet c;
    c.transactions = j.value("transactions", false);
    c.scan = j.value("scan", false);
    c.stream = j.value("stream", false);
    return c;
}

const char* query_op_name(QueryOp op) {
    switch (op) {
        case QueryOp::read: return "read";
        case QueryOp::write: return "write";
        case QueryOp::update: return "update";
        case QueryOp::del: return "delete";
    }
    return "read";
}

std::optional<QueryOp> query_op_from_name(std::string_view name) {
    if (name == "read") return QueryOp::read;
    if (name == "write") return QueryOp::write;
    if (name == "update") return QueryOp::update;
    if (name == "delete") return QueryOp::del;
    return std::nullopt;
}

json uniform_query_to_json(const UniformQuery& q) {
    json j{{"op", query_op_name(q.op)},
           {"store_id", q.store_id},
           {"collection", q.collection}};
    if (q.key) j["key"] = *q.key;
    if (q.selector) j["selector"] = *q.selector;
    if (!q.payload.empty() || q.op == QueryOp::write || q.op == QueryOp::update)
        j["payload_b64"] = base64_encode(q.payload);
    if (q.txn_id) j["txn_id"] = *q.txn_id;
    return j;
}

Result<UniformQuery> uniform_query_from_json(const json& j) {
    if (!j.is_object()) return Error{Err::MalformedRequest, "query must be an object"};
    UniformQuery q;
    auto op = query_op_from_name(j.value("op", ""));
    if (!op) return Error{Err::MalformedRequest, "unknown query op"};
    q.op = *op;
    q.store_id = j.value("store_id", "");
    q.collection = j.value("collection", "default");
    if (j.contains("key") && j["key"].is_string())
        q.key = j["key"].get<std::string>();
    if (j.contains("selector") && j["selector"].is_object())
        q.selector = j["selector"];
    if (j.contains("payload_b64")) {
        auto p = base64_decode(j["payload_b64"].get<std::string>());
        if (!p) return Error{Err::MalformedRequest, "payload_b64 is not base64"};
        q.payload = std::move(*p);
    }
    if (j.contains("txn_id") && j["txn_id"].is_string())
        q.txn_id = j["txn_id"].get<std::string>();
    return q;
}

json wrapper_request_to_json(const WrapperRequest& r) {
    json j{{"request_id", r.request_id}, {"deadline_ms", r.deadline_ms}};
    if (r.query) j["query"] = uniform_query_to_json(*r.query);
    if (r.control)
        j["control"] = json{
            {"action", r.control->action == TxnControl::Action::commit ? "txn_commit"
                                                                       : "txn_abort"},
            {"txn_id", r.control->txn_id}};
    if (r.direct) j["direct"] = true;
    return j;
}

Result<WrapperRequest> wrapper_request_from_json(const json& j) {
    if (!j.is_object() || !j.contains("request_id"))
        return Error{Err::MalformedRequest, "request needs request_id"};
    WrapperRequest r;
    r.request_id = j["request_id"].get<std::string>();
    r.deadline_ms = j.value("deadline_ms", std::uint64_t{0});
    r.direct = j.value("direct", false);
    if (j.contains("query")) {
        auto q = uniform_query_from_json(j["query"]);
        if (!q) return q.error();
        r.query = std::move(q.value());
    }
    if (j.contains("control")) {
        const json& c = j["control"];
        TxnControl control;
        std::string action = c.value("action", "");
        if (action == "txn_commit")
            control.action = TxnControl::Action::commit;
        else if (action == "txn_abort")
            control.action = TxnControl::Action::abort;
        else
            return Error{Err::MalformedRequest, "unknown control action"};
        control.txn_id = c.value("txn_id", "");
        r.control = control;
    }
    if (!r.query && !r.control)
        return Error{Err::MalformedRequest, "request needs query or control"};
    return r;
}

WrapperResponse WrapperResponse::make_payload(std::string id, Bytes value) {
    WrapperResponse r;
    r.request_id = std::move(id);
    r.ok = true;
    r.payload = std::move(value);
    return r;
}

WrapperResponse WrapperResponse::make_rows(std::string id, std::vector<json> rows) {
    WrapperResponse r;
    r.request_id = std::move(id);
    r.ok = true;
    r.rows = std::move(rows);
    return r;
}

WrapperResponse WrapperResponse::make_count(std::string id, std::uint64_t count) {
    WrapperResponse r;
    r.request_id = std::move(id);
    r.ok = true;
    r.count = count;
    return r;
}

WrapperResponse WrapperResponse::make_error(std::string id, Error error) {
    WrapperResponse r;
    r.request_id = std::move(id);
    r.ok = false;
    r.error = std::move(error);
    return r;
}

json wrapper_response_to_json(const WrapperResponse& r) {
    json j{{"request_id", r.request_id}, {"ok", r.ok}};
    if (r.payload) j["payload_b64"] = base64_encode(*r.payload);
    if (r.rows) j["rows"] = *r.rows;
    if (r.count) j["count"] = *r.count;
    if (r.error)
        j["error"] = json{{"code", err_name(r.error->code)},
                          {"message", r.error->message}};
    return j;
}

Result<WrapperResponse> wrapper_response_from_json(const json& j) {
    if (!j.is_object() || !j.contains("request_id") || !j.contains("ok"))
        return Error{Err::MalformedRequest, "response needs request_id and ok"};
    WrapperResponse r;
    r.request_id = j["request_id"].get<std::string>();
    r.ok = j["ok"].get<bool>();
    if (j.contains("payload_b64")) {
        auto p = base64_decode(j["payload_b64"].get<std::string>());
        if (!p) return Error{Err::MalformedRequest, "payload_b64 is not base64"};
        r.payload = std::move(*p);
    }
    if (j.contains("rows")) r.rows = j["rows"].get<std::vector<json>>();
    if (j.contains("count")) r.count = j["count"].get<std::uint64_t>();
    if (j.contains("error"))
        r.error = Error{err_from_name(j["error"].value("code", "")),
                        j["error"].value("message", "")};
    return r;
}

// ---------------------------------------------------------------------------
// Engines

class StoreEngine {
public:
    virtual ~StoreEngine() = default;
    virtual CapabilitySet capabilities() const = 0;
    virtual WrapperResponse execute(const std::string& request_id,
                                    const UniformQuery& q) = 0;
    virtual WrapperResponse txn_control(const std::string& request_id,
                                        const TxnControl& c) = 0;
    virtual Result<std::vector<SnapshotEntry>> snapshot(
        const std::string& collection) const = 0;
    virtual std::vector<std::string> collections() const = 0;
    virtual Status drop_collection(const std::string& collection) = 0;
    virtual std::uint64_t stored_records() const = 0;
};

namespace {

std::optional<Error> validate_query_shape(const UniformQuery& q) {
    bool has_key = q.key.has_value();
    bool has_selector = q.selector.has_value();
    if (has_key == has_selector)
        return Error{Err::SchemaViolation, "exactly one of key/selector required"};
    bool writes = q.op == QueryOp::write || q.op == QueryOp::update;
    if (writes && !has_key)
        return Error{Err::SchemaViolation, "write/update require a key"};
    if (!writes && !q.payload.empty())
        return Error{Err::SchemaViolation, "payload only valid for write/update"};
    return std::nullopt;
}

bool selector_matches(const json& selector, const json& doc) {
    for (auto it = selector.begin(); it != selector.end(); ++it) {
        if (!doc.contains(it.key()) || doc[it.key()] != it.value()) return false;
    }
    return true;
}

template <typename Map>
std::vector<SnapshotEntry> snapshot_of(const Map& records,
                                       const std::function<Bytes(const typename Map::mapped_type&)>& to_value) {
    std::vector<SnapshotEntry> out;
    out.reserve(records.size());
    for (const auto& [key, value] : records) {
        SnapshotEntry e;
        e.key = key;
        e.value = to_value(value);
        e.digest = sha256_hex(e.value);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

class KeyValueEngine : public StoreEngine {
public:
    CapabilitySet capabilities() const override { return {false, true, true}; }

    WrapperResponse execute(const std::string& id, const UniformQuery& q) override {
        if (auto err = validate_query_shape(q))
            return WrapperResponse::make_error(id, *err);
        if (q.txn_id)
            return WrapperResponse::make_error(
                id, Error{Err::CapabilityMissing,
                          "key_value store has no transactions"});
        if (q.selector)
            return WrapperResponse::make_error(
                id, Error{Err::BadSelector, "key_value store has no selectors"});

        std::unique_lock lk(mu_);
        auto& coll = data_[q.collection];
        switch (q.op) {
            case QueryOp::read: {
                auto it = coll.find(*q.key);
                if (it == coll.end())
                    return WrapperResponse::make_error(
                        id, Error{Err::NotFound, "key not found"});
                return WrapperResponse::make_payload(id, it->second);
            }
            case QueryOp::write:
                coll[*q.key] = q.payload;
                return WrapperResponse::make_count(id, 1);
            case QueryOp::update: {
                auto it = coll.find(*q.key);
                if (it == coll.end())
                    return WrapperResponse::make_error(
                        id, Error{Err::NotFound, "key not found"});
                it->second = q.payload;
                return WrapperResponse::make_count(id, 1);
            }
            case QueryOp::del:
                return WrapperResponse::make_count(id, coll.erase(*q.key));
        }
        return WrapperResponse::make_error(id, Error{Err::InternalError, "bad op"});
    }

    WrapperResponse txn_control(const std::string& id, const TxnControl&) override {
        return WrapperResponse::make_error(
            id, Error{Err::CapabilityMissing, "key_value store has no transactions"});
    }

    Result<std::vector<SnapshotEntry>> snapshot(
        const std::string& collection) const override {
        std::shared_lock lk(mu_);
        auto it = data_.find(collection);
        if (it == data_.end())
            return Error{Err::UnknownCollection, "unknown collection " + collection};
        return snapshot_of<std::map<std::string, Bytes>>(
            it->second, [](const Bytes& b) { return b; });
    }

    std::vector<std::string> collections() const override {
        std::shared_lock lk(mu_);
        std::vector<std::string> out;
        for (const auto& [name, _] : data_) out.push_back(name);
        return out;
    }

    Status drop_collection(const std::string& collection) override {
        std::unique_lock lk(mu_);
        data_.erase(collection);
        return Status::ok_status();
    }

    std::uint64_t stored_records() const override {
        std::shared_lock lk(mu_);
        std::uint64_t n = 0;
        for (const auto& [_, coll] : data_) n += coll.size();
        return n;
    }

private:
    mutable std::shared_mutex mu_;
    std::map<std::string, std::map<std::string, Bytes>> data_;
};

class DocumentEngine : public StoreEngine {
public:
    CapabilitySet capabilities() const override { return {false, true, false}; }

    WrapperResponse execute(const std::string& id, const UniformQuery& q) override {
        if (auto err = validate_query_shape(q))
            return WrapperResponse::make_error(id, *err);
        if (q.txn_id)
            return WrapperResponse::make_error(
                id, Error{Err::CapabilityMissing,
                          "document store has no transactions"});

        std::unique_lock lk(mu_);
        auto& coll = data_[q.collection];
        switch (q.op) {
            case QueryOp::read: {
                if (q.key) {
                    auto it = coll.find(*q.key);
                    if (it == coll.end())
                        return WrapperResponse::make_error(
                            id, Error{Err::NotFound, "key not found"});
                    return WrapperResponse::make_payload(id,
                                                         to_bytes(it->second.dump()));
                }
                std::vector<json> rows;
                for (const auto& [_, doc] : coll)
                    if (selector_matches(*q.selector, doc)) rows.push_back(doc);
                return WrapperResponse::make_rows(id, std::move(rows));
            }
            case QueryOp::write:
            case QueryOp::update: {
                json doc = json::parse(to_string(q.payload), nullptr, false);
                if (doc.is_discarded() || !doc.is_object())
                    return WrapperResponse::make_error(
                        id, Error{Err::WrapperError,
                                  "payload is not a JSON document"});
                if (q.op == QueryOp::update && coll.find(*q.key) == coll.end())
                    return WrapperResponse::make_error(
                        id, Error{Err::NotFound, "key not found"});
                coll[*q.key] = std::move(doc);
                return WrapperResponse::make_count(id, 1);
            }
            case QueryOp::del: {
                if (q.key) return WrapperResponse::make_count(id, coll.erase(*q.key));
                std::uint64_t removed = 0;
                for (auto it = coll.begin(); it != coll.end();) {
                    if (selector_matches(*q.selector, it->second)) {
                        it = coll.erase(it);
                        ++removed;
                    } else {
                        ++it;
                    }
                }
                return WrapperResponse::make_count(id, removed);
            }
        }
        return WrapperResponse::make_error(id, Error{Err::InternalError, "bad op"});
    }

    WrapperResponse txn_control(const std::string& id, const TxnControl&) override {
        return WrapperResponse::make_error(
            id, Error{Err::CapabilityMissing, "document store has no transactions"});
    }

    Result<std::vector<SnapshotEntry>> snapshot(
        const std::string& collection) const override {
        std::shared_lock lk(mu_);
        auto it = data_.find(collection);
        if (it == data_.end())
            return Error{Err::UnknownCollection, "unknown collection " + collection};
        return snapshot_of<std::map<std::string, json>>(
            it->second, [](const json& d) { return to_bytes(d.dump()); });
    }

    std::vector<std::string> collections() const override {
        std::shared_lock lk(mu_);
        std::vector<std::string> out;
        for (const auto& [name, _] : data_) out.push_back(name);
        return out;
    }

    Status drop_collection(const std::string& collection) override {
        std::unique_lock lk(mu_);
        data_.erase(collection);
        return Status::ok_status();
    }

    std::uint64_t stored_records() const override {
        std::shared_lock lk(mu_);
        std::uint64_t n = 0;
        for (const auto& [_, coll] : data_) n += coll.size();
        return n;
    }

private:
    mutable std::shared_mutex mu_;
    std::map<std::string, std::map<std::string, json>> data_;
};

// Row store with BEGIN/COMMIT/ABORT. A transaction stages its operations
// and applies them atomically under the single commit lock; the first query
// carrying a fresh txn_id begins it implicitly.
class TabularEngine : public StoreEngine {
public:
    CapabilitySet capabilities() const override { return {true, true, false}; }

    WrapperResponse execute(const std::string& id, const UniformQuery& q) override {
        if (auto err = validate_query_shape(q))
            return WrapperResponse::make_error(id, *err);

        std::unique_lock lk(mu_);
        if (q.txn_id) return execute_in_txn(id, q);
        return apply_now(id, q);
    }

    WrapperResponse txn_control(const std::string& id, const TxnControl& c) override {
        std::unique_lock lk(mu_);
        auto it = txns_.find(c.txn_id);
        if (it == txns_.end())
            return WrapperResponse::make_error(
                id, Error{Err::TxnUnknown, "unknown transaction " + c.txn_id});
        std::uint64_t applied = 0;
        if (c.action == TxnControl::Action::commit) {
            for (const auto& op : it->second) {
                apply_staged(op);
                ++applied;
            }
        }
        txns_.erase(it);
        return WrapperResponse::make_count(id, applied);
    }

    Result<std::vector<SnapshotEntry>> snapshot(
        const std::string& collection) const override {
        std::shared_lock lk(mu_);
        auto it = data_.find(collection);
        if (it == data_.end())
            return Error{Err::UnknownCollection, "unknown collection " + collection};
        return snapshot_of<std::map<std::string, json>>(
            it->second, [](const json& d) { return to_bytes(d.dump()); });
    }

    std::vector<std::string> collections() const override {
        std::shared_lock lk(mu_);
        std::vector<std::string> out;
        for (const auto& [name, _] : data_) out.push_back(name);
        return out;
    }

    Status drop_collection(const std::string& collection) override {
        std::unique_lock lk(mu_);
        data_.erase(collection);
        return Status::ok_status();
    }

    std::uint64_t stored_records() const override {
        std::shared_lock lk(mu_);
        std::uint64_t n = 0;
        for (const auto& [_, coll] : data_) n += coll.size();
        return n;
    }

private:
    struct StagedOp {
        QueryOp op;
        std::string collection;
        std::string key;
        json row;
    };

    WrapperResponse apply_now(const std::string& id, const UniformQuery& q) {
        auto& coll = data_[q.collection];
        switch (q.op) {
            case QueryOp::read: {
                if (q.key) {
                    auto it = coll.find(*q.key);
                    if (it == coll.end())
                        return WrapperResponse::make_error(
                            id, Error{Err::NotFound, "key not found"});
                    return WrapperResponse::make_payload(id,
                                                         to_bytes(it->second.dump()));
                }
                std::vector<json> rows;
                for (const auto& [_, row] : coll)
                    if (selector_matches(*q.selector, row)) rows.push_back(row);
                return WrapperResponse::make_rows(id, std::move(rows));
            }
            case QueryOp::write:
            case QueryOp::update: {
                json row = json::parse(to_string(q.payload), nullptr, false);
                if (row.is_discarded() || !row.is_object())
                    return WrapperResponse::make_error(
                        id, Error{Err::WrapperError, "payload is not a JSON row"});
                if (q.op == QueryOp::update && coll.find(*q.key) == coll.end())
                    return WrapperResponse::make_error(
                        id, Error{Err::NotFound, "key not found"});
                coll[*q.key] = std::move(row);
                return WrapperResponse::make_count(id, 1);
            }
            case QueryOp::del: {
                if (q.key) return WrapperResponse::make_count(id, coll.erase(*q.key));
                std::uint64_t removed = 0;
                for (auto it = coll.begin(); it != coll.end();) {
                    if (selector_matches(*q.selector, it->second)) {
                        it = coll.erase(it);
                        ++removed;
                    } else {
                        ++it;
                    }
                }
                return WrapperResponse::make_count(id, removed);
            }
        }
        return WrapperResponse::make_error(id, Error{Err::InternalError, "bad op"});
    }

    WrapperResponse execute_in_txn(const std::string& id, const UniformQuery& q) {
        auto& staged = txns_[*q.txn_id];  // implicit begin
        if (q.op == QueryOp::read) {
            if (q.key) {
                auto view = txn_view(staged, q.collection, *q.key);
                if (!view)
                    return WrapperResponse::make_error(
                        id, Error{Err::NotFound, "key not found"});
                return WrapperResponse::make_payload(id, to_bytes(view->dump()));
            }
            auto table = overlay_table(staged, q.collection);
            std::vector<json> rows;
            for (const auto& [_, row] : table)
                if (selector_matches(*q.selector, row)) rows.push_back(row);
            return WrapperResponse::make_rows(id, std::move(rows));
        }
        if (q.op == QueryOp::write || q.op == QueryOp::update) {
            json row = json::parse(to_string(q.payload), nullptr, false);
            if (row.is_discarded() || !row.is_object())
                return WrapperResponse::make_error(
                    id, Error{Err::WrapperError, "payload is not a JSON row"});
            staged.push_back({q.op, q.collection, *q.key, std::move(row)});
            return WrapperResponse::make_count(id, 1);
        }
        if (q.key) {
            staged.push_back({QueryOp::del, q.collection, *q.key, json()});
            return WrapperResponse::make_count(id, 1);
        }
        return WrapperResponse::make_error(
            id, Error{Err::BadSelector, "selector delete not allowed in txn"});
    }

    void apply_staged(const StagedOp& op) {
        auto& coll = data_[op.collection];
        switch (op.op) {
            case QueryOp::write:
                coll[op.key] = op.row;
                break;
            case QueryOp::update: {
                auto it = coll.find(op.key);
                if (it != coll.end()) it->second = op.row;
                break;
            }
            case QueryOp::del:
                coll.erase(op.key);
                break;
            case QueryOp::read:
                break;
        }
    }

    std::optional<json> txn_view(const std::vector<StagedOp>& staged,
                                 const std::string& collection,
                                 const std::string& key) const {
        std::optional<json> current;
        auto coll = data_.find(collection);
        if (coll != data_.end()) {
            auto it = coll->second.find(key);
            if (it != coll->second.end()) current = it->second;
        }
        for (const auto& op : staged) {
            if (op.collection != collection || op.key != key) continue;
            switch (op.op) {
                case QueryOp::write:
                    current = op.row;
                    break;
                case QueryOp::update:
                    if (current) current = op.row;
                    break;
                case QueryOp::del:
                    current.reset();
                    break;
                case QueryOp::read:
                    break;
            }
        }
        return current;
    }

    std::map<std::string, json> overlay_table(const std::vector<StagedOp>& staged,
                                              const std::string& collection) const {
        std::map<std::string, json> table;
        auto coll = data_.find(collection);
        if (coll != data_.end()) table = coll->second;
        for (const auto& op : staged) {
            if (op.collection != collection) continue;
            switch (op.op) {
                case QueryOp::write:
                    table[op.key] = op.row;
                    break;
                case QueryOp::update: {
                    auto it = table.find(op.key);
                    if (it != table.end()) it->second = op.row;
                    break;
                }
                case QueryOp::del:
                    table.erase(op.key);
                    break;
                case QueryOp::read:
                    break;
            }
        }
        return table;
    }

    mutable std::shared_mutex mu_;
    std::map<std::string, std::map<std::string, json>> data_;
    std::map<std::string, std::vector<StagedOp>> txns_;
};

std::shared_ptr<StoreEngine> make_store_engine(StoreKind kind) {
    switch (kind) {
        case StoreKind::key_value: return std::make_shared<KeyValueEngine>();
        case StoreKind::document: return std::make_shared<DocumentEngine>();
        case StoreKind::tabular: return std::make_shared<TabularEngine>();
    }
    return std::make_shared<KeyValueEngine>();
}

// ---------------------------------------------------------------------------
// Wrapper runtime

namespace {

std::string qualified(const std::string& store_id, const std::string& collection) {
    return store_id + "/" + collection;
}

}  // namespace

EmbeddedWrapper::EmbeddedWrapper(StoreKind kind, bool threaded,
                                 std::shared_ptr<StoreEngine> engine)
    : kind_(kind),
      threaded_(threaded),
      engine_(engine ? std::move(engine) : make_store_engine(kind)) {
    if (threaded_) worker_ = std::thread([this] { worker_loop(); });
}

EmbeddedWrapper::~EmbeddedWrapper() {
    {
        std::lock_guard lk(queue_mu_);
        stop_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
    std::lock_guard lk(queue_mu_);
    for (auto& p : queue_)
        p.promise.set_value(WrapperResponse::make_error(
            p.req.request_id, Error{Err::Unreachable, "wrapper stopped"}));
    queue_.clear();
}

CapabilitySet EmbeddedWrapper::capabilities() const { return engine_->capabilities(); }

WrapperResponse EmbeddedWrapper::execute(const WrapperRequest& req) {
    if (req.control) {
        if (!engine_->capabilities().transactions)
            return WrapperResponse::make_error(
                req.request_id,
                Error{Err::CapabilityMissing, "store kind has no transactions"});
        return engine_->txn_control(req.request_id, *req.control);
    }
    if (req.query) {
        UniformQuery q = *req.query;
        q.collection = qualified(q.store_id, q.collection);
        return engine_->execute(req.request_id, q);
    }
    return WrapperResponse::make_error(
        req.request_id, Error{Err::MalformedRequest, "request needs query or control"});
}

WrapperResponse EmbeddedWrapper::handle(const WrapperRequest& req) {
    if (req.direct || !threaded_) return execute(req);
    auto future = enqueue(req);
    if (req.deadline_ms > 0) {
        if (future.wait_for(std::chrono::milliseconds(req.deadline_ms)) !=
            std::future_status::ready)
            return WrapperResponse::make_error(
                req.request_id,
                Error{Err::DeadlineExceeded, "request deadline exceeded"});
    }
    return future.get();
}

std::future<WrapperResponse> EmbeddedWrapper::enqueue(WrapperRequest req) {
    Pending p;
    p.req = std::move(req);
    p.enqueued_at = std::chrono::steady_clock::now();
    auto future = p.promise.get_future();
    {
        std::lock_guard lk(queue_mu_);
        queue_.push_back(std::move(p));
    }
    cv_.notify_one();
    return future;
}

void EmbeddedWrapper::worker_loop() {
    while (true) {
        Pending p;
        {
            std::unique_lock lk(queue_mu_);
            cv_.wait(lk, [&] { return stop_ || (!queue_.empty() && !paused_); });
            if (stop_) return;
            p = std::move(queue_.front());
            queue_.pop_front();
        }
        if (p.req.deadline_ms > 0 &&
            std::chrono::steady_clock::now() - p.enqueued_at >
                std::chrono::milliseconds(p.req.deadline_ms)) {
            p.promise.set_value(WrapperResponse::make_error(
                p.req.request_id,
                Error{Err::DeadlineExceeded, "request deadline exceeded"}));
        } else {
            p.promise.set_value(execute(p.req));
        }
        ++served_total_;
    }
}

bool EmbeddedWrapper::serve_one() {
    Pending p;
    {
        std::lock_guard lk(queue_mu_);
        if (queue_.empty() || paused_) return false;
        p = std::move(queue_.front());
        queue_.pop_front();
    }
    if (p.req.deadline_ms > 0 &&
        std::chrono::steady_clock::now() - p.enqueued_at >
            std::chrono::milliseconds(p.req.deadline_ms)) {
        p.promise.set_value(WrapperResponse::make_error(
            p.req.request_id,
            Error{Err::DeadlineExceeded, "request deadline exceeded"}));
    } else {
        p.promise.set_value(execute(p.req));
    }
    ++served_total_;
    return true;
}

std::size_t EmbeddedWrapper::pump(std::size_t max_requests) {
    std::size_t n = 0;
    while (n < max_requests && serve_one()) ++n;
    return n;
}

void EmbeddedWrapper::pause() { paused_ = true; }

void EmbeddedWrapper::resume() {
    paused_ = false;
    cv_.notify_all();
}

WrapperHealth EmbeddedWrapper::health() const {
    WrapperHealth h;
    h.status = paused_ ? "paused" : "healthy";
    h.stored_records = engine_->stored_records();
    std::lock_guard lk(queue_mu_);
    h.queue_depth = queue_.size();
    return h;
}

Result<std::vector<SnapshotEntry>> EmbeddedWrapper::snapshot(
    const std::string& store_id, const std::string& collection) const {
    return engine_->snapshot(qualified(store_id, collection));
}

std::vector<std::string> EmbeddedWrapper::collections(
    const std::string& store_id) const {
    std::vector<std::string> out;
    std::string prefix = store_id + "/";
    for (const auto& name : engine_->collections())
        if (name.rfind(prefix, 0) == 0) out.push_back(name.substr(prefix.size()));
    return out;
}

Status EmbeddedWrapper::drop_collection(const std::string& store_id,
                                        const std::string& collection) {
    return engine_->drop_collection(qualified(store_id, collection));
}

std::shared_ptr<EmbeddedWrapper> make_wrapper(StoreKind kind, bool threaded) {
    return std::make_shared<EmbeddedWrapper>(kind, threaded);
}

InProcessWrapperClient::InProcessWrapperClient(
    std::shared_ptr<EmbeddedWrapper> wrapper, std::string endpoint)
    : wrapper_(std::move(wrapper)), endpoint_(std::move(endpoint)) {}

Result<WrapperResponse> InProcessWrapperClient::handle(const WrapperRequest& req) {
    return wrapper_->handle(req);
}

std::future<WrapperResponse> InProcessWrapperClient::handle_async(
    WrapperRequest req) {
    return wrapper_->enqueue(std::move(req));
}

Result<CapabilitySet> InProcessWrapperClient::capabilities() {
    return wrapper_->capabilities();
}

Result<WrapperHealth> InProcessWrapperClient::health() { return wrapper_->health(); }

Result<std::vector<SnapshotEntry>> InProcessWrapperClient::snapshot(
    const std::string& store_id, const std::string& collection) {
    return wrapper_->snapshot(store_id, collection);
}

Status InProcessWrapperClient::drop_collection(const std::string& store_id,
                                               const std::string& collection) {
    return wrapper_->drop_collection(store_id, collection);
}

}  // namespace budamaf::wrappers
