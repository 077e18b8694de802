#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "budamaf/bytes.hpp"
#include "budamaf/result.hpp"

namespace budamaf::wrappers {

using json = nlohmann::json;

enum class StoreKind { key_value, document, tabular };

const char* store_kind_name(StoreKind kind);
std::optional<StoreKind> store_kind_from_name(std::string_view name);

struct CapabilitySet {
    bool transactions = false;
    bool scan = false;
    bool stream = false;

    bool operator==(const CapabilitySet&) const = default;
};

json capability_set_to_json(const CapabilitySet& c);
CapabilitySet capability_set_from_json(const json& j);

enum class QueryOp { read, write, update, del };

const char* query_op_name(QueryOp op);
std::optional<QueryOp> query_op_from_name(std::string_view name);

// The common-language request: one shape for every store kind.
struct UniformQuery {
    QueryOp op = QueryOp::read;
    std::string store_id;
    std::string collection = "default";
    std::optional<std::string> key;
    std::optional<json> selector;
    Bytes payload;
    std::optional<std::string> txn_id;
};

json uniform_query_to_json(const UniformQuery& q);
Result<UniformQuery> uniform_query_from_json(const json& j);

struct TxnControl {
    enum class Action { commit, abort };
    Action action = Action::commit;
    std::string txn_id;
};

struct WrapperRequest {
    std::string request_id;
    std::optional<UniformQuery> query;
    std::optional<TxnControl> control;
    std::uint64_t deadline_ms = 0;  // 0 = no deadline
    // Internal maintenance channel (migration, replication, transforms):
    // executes immediately instead of entering the request queue.
    bool direct = false;
};

json wrapper_request_to_json(const WrapperRequest& r);
Result<WrapperRequest> wrapper_request_from_json(const json& j);

// Normalized response; exactly one of payload/rows/count/error is present.
struct WrapperResponse {
    std::string request_id;
    bool ok = false;
    std::optional<Bytes> payload;
    std::optional<std::vector<json>> rows;
    std::optional<std::uint64_t> count;
    std::optional<Error> error;

    static WrapperResponse make_payload(std::string id, Bytes value);
    static WrapperResponse make_rows(std::string id, std::vector<json> rows);
    static WrapperResponse make_count(std::string id, std::uint64_t count);
    static WrapperResponse make_error(std::string id, Error error);
};

json wrapper_response_to_json(const WrapperResponse& r);
Result<WrapperResponse> wrapper_response_from_json(const json& j);

struct WrapperHealth {
    std::string status;  // healthy | paused
    std::uint64_t stored_records = 0;
    std::uint64_t queue_depth = 0;
};

struct SnapshotEntry {
    std::string key;
    Bytes value;
    std::string digest;
};

class StoreEngine;

// Engines can be shared between wrapper instances of the same kind; the
// wrappers then act as stateless translators in front of one backend, the
// way multiple wrapper processes front one store cluster.
std::shared_ptr<StoreEngine> make_store_engine(StoreKind kind);

// One wrapper: an embedded engine behind the wire protocol, processing
// requests from a queue. The queue is drained by a worker thread in live
// mode or by explicit pump() calls under a simulation clock. pause() stalls
// draining; queued requests accumulate and the health gauge reflects it.
class EmbeddedWrapper {
public:
    EmbeddedWrapper(StoreKind kind, bool threaded = true,
                    std::shared_ptr<StoreEngine> engine = nullptr);
    ~EmbeddedWrapper();

    EmbeddedWrapper(const EmbeddedWrapper&) = delete;
    EmbeddedWrapper& operator=(const EmbeddedWrapper&) = delete;

    StoreKind kind() const { return kind_; }
    CapabilitySet capabilities() const;

    WrapperResponse handle(const WrapperRequest& req);
    std::future<WrapperResponse> enqueue(WrapperRequest req);

    WrapperHealth health() const;
    // Collections are namespaced per store inside the backend engine.
    Result<std::vector<SnapshotEntry>> snapshot(const std::string& store_id,
                                                const std::string& collection) const;
    std::vector<std::string> collections(const std::string& store_id) const;
    Status drop_collection(const std::string& store_id,
                           const std::string& collection);

    void pause();
    void resume();
    bool paused() const { return paused_; }

    // Manual-pump mode processing; returns the number of requests served.
    std::size_t pump(std::size_t max_requests);

    std::uint64_t served_total() const { return served_total_; }

private:
    struct Pending {
        WrapperRequest req;
        std::promise<WrapperResponse> promise;
        std::chrono::steady_clock::time_point enqueued_at;
    };

    void worker_loop();
    WrapperResponse execute(const WrapperRequest& req);
    bool serve_one();

    StoreKind kind_;
    bool threaded_;
    std::shared_ptr<StoreEngine> engine_;

    mutable std::mutex queue_mu_;
    std::condition_variable cv_;
    std::deque<Pending> queue_;
    std::atomic<bool> paused_{false};
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> served_total_{0};
    std::thread worker_;
};

std::shared_ptr<EmbeddedWrapper> make_wrapper(StoreKind kind, bool threaded = true);

// Client-side view of a wrapper endpoint; in-process and HTTP transports
// both implement it, keeping the off-loading side loosely coupled.
class WrapperClient {
public:
    virtual ~WrapperClient() = default;
    virtual Result<WrapperResponse> handle(const WrapperRequest& req) = 0;
    virtual std::future<WrapperResponse> handle_async(WrapperRequest req) = 0;
    virtual Result<CapabilitySet> capabilities() = 0;
    virtual Result<WrapperHealth> health() = 0;
    virtual Result<std::vector<SnapshotEntry>> snapshot(const std::string& store_id,
                                                        const std::string& collection) = 0;
    virtual Status drop_collection(const std::string& store_id,
                                   const std::string& collection) = 0;
    virtual std::string endpoint() const = 0;
};

class InProcessWrapperClient : public WrapperClient {
public:
    explicit InProcessWrapperClient(std::shared_ptr<EmbeddedWrapper> wrapper,
                                    std::string endpoint = "inproc://wrapper");
    Result<WrapperResponse> handle(const WrapperRequest& req) override;
    std::future<WrapperResponse> handle_async(WrapperRequest req) override;
    Result<CapabilitySet> capabilities() override;
    Result<WrapperHealth> health() override;
    Result<std::vector<SnapshotEntry>> snapshot(const std::string& store_id,
                                                const std::string& collection) override;
    Status drop_collection(const std::string& store_id,
                           const std::string& collection) override;
    std::string endpoint() const override { return endpoint_; }

    std::shared_ptr<EmbeddedWrapper> wrapper() { return wrapper_; }

private:
    std::shared_ptr<EmbeddedWrapper> wrapper_;
    std::string endpoint_;
};

}  // namespace budamaf::wrappers
