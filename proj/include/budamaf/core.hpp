#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "budamaf/protocol.hpp"
#include "budamaf/result.hpp"
#include "budamaf/security.hpp"

namespace budamaf::core {

using json = nlohmann::json;

enum class InstanceHealth { healthy, suspect, down };

const char* instance_health_name(InstanceHealth h);

// Component-side executor of routed jobs. One handler per component; many
// channel instances may front the same handler.
class ComponentHandler {
public:
    virtual ~ComponentHandler() = default;
    virtual Result<json> handle_job(const protocol::JobRecord& job) = 0;
    // Cancellation signal for long-running jobs (continuous replication).
    virtual void cancel_job(const std::string& job_id) { (void)job_id; }
};

// One reachable instance endpoint of a component.
class ComponentChannel {
public:
    virtual ~ComponentChannel() = default;
    virtual std::future<Result<json>> submit(protocol::JobRecord job) = 0;
    virtual Status probe() = 0;
    virtual void cancel(const std::string& job_id) = 0;
    virtual std::string endpoint() const = 0;
};

// In-process instance: a queue drained by one worker thread. pause() makes
// the instance stall without failing, which is how the fault harness models
// a hung component.
class InProcessChannel : public ComponentChannel {
public:
    InProcessChannel(std::shared_ptr<ComponentHandler> handler, std::string endpoint);
    ~InProcessChannel() override;

    std::future<Result<json>> submit(protocol::JobRecord job) override;
    Status probe() override;
    void cancel(const std::string& job_id) override;
    std::string endpoint() const override { return endpoint_; }

    void pause();
    void resume();

private:
    struct Pending {
        protocol::JobRecord job;
        std::promise<Result<json>> promise;
    };

    void worker_loop();

    std::shared_ptr<ComponentHandler> handler_;
    std::string endpoint_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Pending> queue_;
    std::atomic<bool> paused_{false};
    std::atomic<bool> stop_{false};
    std::thread worker_;
};

struct ComponentInstance {
    protocol::ComponentName component = protocol::ComponentName::offloading_apis;
    std::string instance_id;
    std::string endpoint;
    InstanceHealth health = InstanceHealth::healthy;
    std::uint64_t inflight = 0;
};

struct SubmitOutcome {
    std::string job_id;
    Status status;
};

// Single entry point and coordinator. Authenticates, consults the security
// engine, enforces data protocols on payloads in transit, routes jobs to
// component instances with round-robin balancing, and converts dispatch
// timeouts into one redirect before a job crashes.
class CoreGateway {
public:
    struct Options {
        std::uint64_t dispatch_timeout_ms = 5000;
        std::size_t worker_threads = 4;
        std::string wal_path;
        std::string principals_path;
        std::string default_collection = "default";
    };

    CoreGateway(security::SecurityEngine* security, Options opts);
    ~CoreGateway();

    CoreGateway(const CoreGateway&) = delete;
    CoreGateway& operator=(const CoreGateway&) = delete;

    // --- principals --------------------------------------------------------
    void add_principal(const protocol::Credentials& creds);
    Status load_principals(const std::string& path);

    // --- component instances -------------------------------------------------
    void register_instance(protocol::ComponentName component,
                           const std::string& instance_id,
                           std::shared_ptr<ComponentChannel> channel);
    Result<ComponentInstance> balance(protocol::ComponentName component);
    std::vector<ComponentInstance> instances(protocol::ComponentName component) const;
    void probe_suspects();

    // --- OCCI-style job interface ---------------------------------------------
    SubmitOutcome submit_job(const json& raw);
    Result<protocol::JobRecord> get_job(const std::string& job_id,
                                        const protocol::Credentials& creds) const;
    Status stream_put(const std::string& job_id, const Bytes& chunk, bool final_chunk,
                      const protocol::Credentials& creds);
    Status delete_job(const std::string& job_id, const protocol::Credentials& creds);

    // Applies the decision's protocols to a payload in transit.
    Result<Bytes> enforce_protocols(const Bytes& payload,
                                    const security::AccessDecision& decision,
                                    const std::string& dataset_id,
                                    security::DataClass cls);

    // --- introspection ------------------------------------------------------
    Result<protocol::JobRecord> wait_for_job(const std::string& job_id,
                                             std::uint64_t timeout_ms) const;
    int dispatch_attempts(const std::string& job_id) const;
    std::size_t job_count() const;
    std::vector<json> event_log() const;
    std::uint64_t overloaded_events() const;
    Result<protocol::Credentials> authenticate(const protocol::Credentials& claimed) const;

    // Called during assembly so writes can feed dataset locations to the
    // off-loading component for in-place transforms.
    void set_dataset_location_hook(
        std::function<void(const std::string&, const std::string&, const std::string&)> hook);

private:
    struct JobEntry {
        protocol::JobRecord record;
        security::AccessDecision decision;
        security::DataClass data_class = security::DataClass::application;
        std::string dataset_id;
        int attempts = 0;
        bool channel_open = false;
        bool long_running = false;
        Bytes stream_buffer;
        std::uint64_t stream_records = 0;
    };

    struct PrincipalInfo {
        std::string token;
        std::set<protocol::Role> roles;
    };

    void enqueue_task(std::function<void()> task);
    void worker_loop();
    void dispatch_job(const std::string& job_id);
    Result<ComponentInstance> pick_instance(protocol::ComponentName component,
                                            const std::string& exclude_id);
    void mark_suspect(const std::string& instance_id);
    void adjust_inflight(const std::string& instance_id, std::int64_t delta);
    Status apply_event(const std::string& job_id, protocol::JobEvent event,
                       std::optional<protocol::JobData> data);
    void append_wal(const std::string& job_id, const std::string& event,
                    const std::string& note);
    void add_event(const std::string& type, json fields);
    void finish_with_result(const std::string& job_id, const json& result);
    void crash_with_error(const std::string& job_id, Error error);
    Result<json> forward_once(const protocol::JobRecord& job,
                              const ComponentInstance& instance);
    Status forward_stream_batch(const std::string& job_id, const json& details_patch);
    json handle_self_job(const protocol::JobRecord& job);

    friend class CoreSelfHandler;

    security::SecurityEngine* security_;
    Options opts_;

    mutable std::mutex principals_mu_;
    std::map<std::string, PrincipalInfo> principals_;

    mutable std::mutex instances_mu_;
    struct InstanceSlot {
        ComponentInstance info;
        std::shared_ptr<ComponentChannel> channel;
    };
    std::map<std::string, InstanceSlot> instances_;
    std::map<protocol::ComponentName, std::vector<std::string>> by_component_;
    std::map<protocol::ComponentName, std::uint64_t> rr_cursor_;

    mutable std::mutex jobs_mu_;
    mutable std::condition_variable jobs_cv_;
    std::map<std::string, JobEntry> jobs_;
    std::atomic<std::uint64_t> logical_clock_{0};

    mutable std::mutex wal_mu_;
    std::uint64_t wal_seq_ = 0;

    mutable std::mutex events_mu_;
    std::vector<json> events_;

    std::function<void(const std::string&, const std::string&, const std::string&)>
        dataset_location_hook_;

    std::mutex tasks_mu_;
    std::condition_variable tasks_cv_;
    std::deque<std::function<void()>> tasks_;
    bool tasks_stop_ = false;
    std::vector<std::thread> workers_;
};

}  // namespace budamaf::core
