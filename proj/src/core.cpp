#include "budamaf/core.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

namespace budamaf::core {

using protocol::JobEvent;
using protocol::JobKind;
using protocol::JobStatus;

const char* instance_health_name(InstanceHealth h) {
    switch (h) {
        case InstanceHealth::healthy: return "healthy";
        case InstanceHealth::suspect: return "suspect";
        case InstanceHealth::down: return "down";
    }
    return "healthy";
}

// ---------------------------------------------------------------------------
// InProcessChannel

InProcessChannel::InProcessChannel(std::shared_ptr<ComponentHandler> handler,
                                   std::string endpoint)
    : handler_(std::move(handler)), endpoint_(std::move(endpoint)) {
    worker_ = std::thread([this] { worker_loop(); });
}

InProcessChannel::~InProcessChannel() {
    {
        std::lock_guard lk(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
    std::lock_guard lk(mu_);
    for (auto& p : queue_)
        p.promise.set_value(Error{Err::Unreachable, "instance stopped"});
    queue_.clear();
}

std::future<Result<json>> InProcessChannel::submit(protocol::JobRecord job) {
    Pending p;
    p.job = std::move(job);
    auto future = p.promise.get_future();
    {
        std::lock_guard lk(mu_);
        queue_.push_back(std::move(p));
    }
    cv_.notify_one();
    return future;
}

void InProcessChannel::worker_loop() {
    while (true) {
        Pending p;
        {
            std::unique_lock lk(mu_);
            cv_.wait(lk, [&] { return stop_ || (!queue_.empty() && !paused_); });
            if (stop_) return;
            p = std::move(queue_.front());
            queue_.pop_front();
        }
        p.promise.set_value(handler_->handle_job(p.job));
    }
}

Status InProcessChannel::probe() {
    if (paused_) return Status(Err::Unreachable, "instance not responding");
    return Status::ok_status();
}

void InProcessChannel::cancel(const std::string& job_id) {
    handler_->cancel_job(job_id);
}

void InProcessChannel::pause() { paused_ = true; }

void InProcessChannel::resume() {
    paused_ = false;
    cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Core self component: the job registry is the responsible component for
// status queries.

class CoreSelfHandler : public ComponentHandler {
public:
    explicit CoreSelfHandler(CoreGateway* core) : core_(core) {}

    Result<json> handle_job(const protocol::JobRecord& job) override {
        return core_->handle_self_job(job);
    }

private:
    CoreGateway* core_;
};

// ---------------------------------------------------------------------------
// CoreGateway

CoreGateway::CoreGateway(security::SecurityEngine* security, Options opts)
    : security_(security), opts_(std::move(opts)) {
    std::size_t n = std::max<std::size_t>(1, opts_.worker_threads);
    for (std::size_t i = 0; i < n; ++i)
        workers_.emplace_back([this] { worker_loop(); });
    if (!opts_.principals_path.empty()) (void)load_principals(opts_.principals_path);
    register_instance(
        protocol::ComponentName::core_gateway, "core-self",
        std::make_shared<InProcessChannel>(std::make_shared<CoreSelfHandler>(this),
                                           "inproc://core"));
}

CoreGateway::~CoreGateway() {
    {
        std::lock_guard lk(tasks_mu_);
        tasks_stop_ = true;
    }
    tasks_cv_.notify_all();
    for (auto& w : workers_)
        if (w.joinable()) w.join();
}

void CoreGateway::enqueue_task(std::function<void()> task) {
    {
        std::lock_guard lk(tasks_mu_);
        tasks_.push_back(std::move(task));
    }
    tasks_cv_.notify_one();
}

void CoreGateway::worker_loop() {
    while (true) {
        std::function<void()> task;
        {
            std::unique_lock lk(tasks_mu_);
            tasks_cv_.wait(lk, [&] { return tasks_stop_ || !tasks_.empty(); });
            if (tasks_stop_ && tasks_.empty()) return;
            task = std::move(tasks_.front());
            tasks_.pop_front();
        }
        task();
    }
}

// --- principals ---------------------------------------------------------------

void CoreGateway::add_principal(const protocol::Credentials& creds) {
    std::lock_guard lk(principals_mu_);
    principals_[creds.principal_id] = PrincipalInfo{creds.token, creds.roles};
}

Status CoreGateway::load_principals(const std::string& path) {
    std::ifstream in(path);
    if (!in) return Status(Err::InternalError, "cannot open principal registry " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("principals"))
        return Status(Err::InternalError, "principal registry is not valid JSON");
    for (const auto& p : doc["principals"]) {
        auto creds = protocol::credentials_from_json(p);
        if (creds) add_principal(creds.value());
    }
    return Status::ok_status();
}

Result<protocol::Credentials> CoreGateway::authenticate(
    const protocol::Credentials& claimed) const {
    std::lock_guard lk(principals_mu_);
    auto it = principals_.find(claimed.principal_id);
    if (it == principals_.end() || it->second.token != claimed.token)
        return Error{Err::AuthenticationFailed,
                     "unknown principal or bad token for " + claimed.principal_id};
    protocol::Credentials verified = claimed;
    verified.roles = it->second.roles;  // roles come from the registry, not the claim
    return verified;
}

// --- component instances ---------------------------------------------------------

void CoreGateway::register_instance(protocol::ComponentName component,
                                    const std::string& instance_id,
                                    std::shared_ptr<ComponentChannel> channel) {
    std::lock_guard lk(instances_mu_);
    ComponentInstance info;
    info.component = component;
    info.instance_id = instance_id;
    info.endpoint = channel->endpoint();
    instances_[instance_id] = InstanceSlot{info, std::move(channel)};
    by_component_[component].push_back(instance_id);
}

Result<ComponentInstance> CoreGateway::pick_instance(
    protocol::ComponentName component, const std::string& exclude_id) {
    std::lock_guard lk(instances_mu_);
    auto ids = by_component_.find(component);
    if (ids == by_component_.end() || ids->second.empty())
        return Error{Err::Overloaded,
                     std::string("no instance registered for ") +
                         protocol::component_name(component)};
    std::vector<std::string> healthy;
    for (const auto& id : ids->second) {
        const auto& slot = instances_[id];
        if (slot.info.health == InstanceHealth::healthy && id != exclude_id)
            healthy.push_back(id);
    }
    if (healthy.empty())
        return Error{Err::Overloaded,
                     std::string("no healthy instance for ") +
                         protocol::component_name(component)};
    std::uint64_t cursor = rr_cursor_[component]++;
    return instances_[healthy[cursor % healthy.size()]].info;
}

Result<ComponentInstance> CoreGateway::balance(protocol::ComponentName component) {
    auto picked = pick_instance(component, "");
    if (!picked) {
        add_event("overloaded",
                  json{{"component", protocol::component_name(component)},
                       {"note", "high load, patience is advised"}});
    }
    return picked;
}

std::vector<ComponentInstance> CoreGateway::instances(
    protocol::ComponentName component) const {
    std::lock_guard lk(instances_mu_);
    std::vector<ComponentInstance> out;
    auto ids = by_component_.find(component);
    if (ids == by_component_.end()) return out;
    for (const auto& id : ids->second) out.push_back(instances_.at(id).info);
    return out;
}

void CoreGateway::probe_suspects() {
    std::vector<std::pair<std::string, std::shared_ptr<ComponentChannel>>> suspects;
    {
        std::lock_guard lk(instances_mu_);
        for (auto& [id, slot] : instances_)
            if (slot.info.health == InstanceHealth::suspect)
                suspects.emplace_back(id, slot.channel);
    }
    for (auto& [id, channel] : suspects) {
        if (channel->probe().ok()) {
            std::lock_guard lk(instances_mu_);
            instances_[id].info.health = InstanceHealth::healthy;
            add_event("instance_recovered", json{{"instance", id}});
        }
    }
}

void CoreGateway::mark_suspect(const std::string& instance_id) {
    std::lock_guard lk(instances_mu_);
    auto it = instances_.find(instance_id);
    if (it == instances_.end()) return;
    it->second.info.health = InstanceHealth::suspect;
    add_event("instance_suspect", json{{"instance", instance_id}});
}

void CoreGateway::adjust_inflight(const std::string& instance_id, std::int64_t delta) {
    std::lock_guard lk(instances_mu_);
    auto it = instances_.find(instance_id);
    if (it == instances_.end()) return;
    if (delta < 0 && it->second.info.inflight < static_cast<std::uint64_t>(-delta))
        it->second.info.inflight = 0;
    else
        it->second.info.inflight += delta;
}

// --- job state ------------------------------------------------------------------

Status CoreGateway::apply_event(const std::string& job_id, JobEvent event,
                                std::optional<protocol::JobData> data) {
    std::lock_guard lk(jobs_mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return Status(Err::NotFound, "job " + job_id + " not found");
    auto next = protocol::transition(it->second.record.status, event);
    if (!next) return Status(next.error());
    it->second.record.status = next.value();
    if (data) it->second.record.data = std::move(*data);
    it->second.record.updated_at = ++logical_clock_;
    if (protocol::is_terminal(next.value())) it->second.channel_open = false;
    jobs_cv_.notify_all();
    return Status::ok_status();
}

void CoreGateway::append_wal(const std::string& job_id, const std::string& event,
                             const std::string& note) {
    if (opts_.wal_path.empty()) return;
    std::lock_guard lk(wal_mu_);
    std::ofstream out(opts_.wal_path, std::ios::app);
    if (!out) return;
    out << json{{"seq", ++wal_seq_},
                {"job_id", job_id},
                {"event", event},
                {"note", note}}
               .dump()
        << '\n';
}

void CoreGateway::add_event(const std::string& type, json fields) {
    std::lock_guard lk(events_mu_);
    fields["type"] = type;
    events_.push_back(std::move(fields));
}

std::vector<json> CoreGateway::event_log() const {
    std::lock_guard lk(events_mu_);
    return events_;
}

std::uint64_t CoreGateway::overloaded_events() const {
    std::lock_guard lk(events_mu_);
    std::uint64_t n = 0;
    for (const auto& e : events_)
        if (e.value("type", "") == "overloaded") ++n;
    return n;
}

void CoreGateway::finish_with_result(const std::string& job_id, const json& result) {
    (void)apply_event(job_id, JobEvent::succeed, protocol::JobData::result(result));
    append_wal(job_id, "finished", "");
}

void CoreGateway::crash_with_error(const std::string& job_id, Error error) {
    append_wal(job_id, "crashed", error.message);
    (void)apply_event(job_id, JobEvent::fail, protocol::JobData::error(std::move(error)));
}

// --- enforcement ------------------------------------------------------------------

Result<Bytes> CoreGateway::enforce_protocols(const Bytes& payload,
                                             const security::AccessDecision& decision,
                                             const std::string& dataset_id,
                                             security::DataClass cls) {
    return security_->enforce_payload(dataset_id, cls, decision.protocols, payload);
}

void CoreGateway::set_dataset_location_hook(
    std::function<void(const std::string&, const std::string&, const std::string&)>
        hook) {
    dataset_location_hook_ = std::move(hook);
}

// --- submit -----------------------------------------------------------------------

namespace {

bool details_streaming(const json& details) {
    return details.value("stream", false);
}

std::string details_collection(const json& details, const std::string& fallback) {
    return details.value("collection", fallback);
}

std::string dataset_for(const json& details, const std::string& fallback) {
    if (details.contains("metadata") && details["metadata"].is_object() &&
        details["metadata"].contains("dataset_id"))
        return details["metadata"]["dataset_id"].get<std::string>();
    return fallback;
}

bool is_data_op(JobKind kind) {
    return kind == JobKind::read || kind == JobKind::write ||
           kind == JobKind::update || kind == JobKind::del;
}

}  // namespace

SubmitOutcome CoreGateway::submit_job(const json& raw) {
    auto parsed = protocol::parse_job_request(raw);
    if (!parsed) return SubmitOutcome{"", Status(parsed.error())};
    protocol::JobRecord job = std::move(parsed.value());

    auto verified = authenticate(job.initiator);
    if (!verified) return SubmitOutcome{"", Status(verified.error())};
    job.initiator = std::move(verified.value());
    job.created_at = ++logical_clock_;
    job.updated_at = job.created_at;
    job.job_details["job_id"] = job.job_id;

    {
        std::lock_guard lk(jobs_mu_);
        JobEntry entry;
        entry.record = job;
        jobs_.emplace(job.job_id, std::move(entry));
    }
    append_wal(job.job_id, "submitted", protocol::job_kind_name(job.job_description));

    const json& details = job.job_details;
    JobKind kind = job.job_description;
    bool streaming = false;

    // Security consultation and on-the-wire protocol enforcement for
    // payload-carrying kinds.
    if (is_data_op(kind)) {
        std::string store = details["store_id"].get<std::string>();
        std::string coll = details_collection(details, opts_.default_collection);
        std::string dataset = dataset_for(details, store + "/" + coll);
        json metadata = details.value("metadata", json::object());
        bool writes = kind == JobKind::write || kind == JobKind::update;
        if (writes)
            (void)security_->ensure_dataset(dataset, job.initiator.principal_id, metadata,
                                      job.initiator);
        auto action = kind == JobKind::read ? security::AclAction::read
                                            : security::AclAction::write;
        auto decision = security_->check_access(job.initiator, dataset, action);
        if (!decision) {
            crash_with_error(job.job_id, decision.error());
            return SubmitOutcome{job.job_id, Status(decision.error())};
        }
        if (!decision.value().allowed) {
            Error denial{Err::AccessDenied,
                         "access denied on " + dataset + ": " +
                             decision.value().reason};
            crash_with_error(job.job_id, denial);
            return SubmitOutcome{job.job_id, Status(denial)};
        }
        auto info = security_->dataset(dataset);
        auto cls = info ? info->data_class : security::DataClass::application;
        streaming = writes && details_streaming(details);
        {
            std::lock_guard lk(jobs_mu_);
            auto& entry = jobs_[job.job_id];
            entry.decision = decision.value();
            entry.data_class = cls;
            entry.dataset_id = dataset;
        }
        if (writes && !streaming) {
            auto payload = base64_decode(details["value_b64"].get<std::string>());
            auto enforced = enforce_protocols(*payload, decision.value(), dataset, cls);
            if (!enforced) {
                crash_with_error(job.job_id, enforced.error());
                return SubmitOutcome{job.job_id, Status(enforced.error())};
            }
            std::lock_guard lk(jobs_mu_);
            jobs_[job.job_id].record.job_details["value_b64"] =
                base64_encode(enforced.value());
        }
        if (writes && dataset_location_hook_) dataset_location_hook_(dataset, store, coll);
    } else if (kind == JobKind::analytics_save) {
        std::string dataset = details["dataset_id"].get<std::string>();
        json description = details.value("description", json::object());
        (void)security_->ensure_dataset(dataset, job.initiator.principal_id, description,
                                  job.initiator);
        auto decision =
            security_->check_access(job.initiator, dataset, security::AclAction::write);
        if (!decision) {
            crash_with_error(job.job_id, decision.error());
            return SubmitOutcome{job.job_id, Status(decision.error())};
        }
        if (!decision.value().allowed) {
            Error denial{Err::AccessDenied, "access denied on " + dataset};
            crash_with_error(job.job_id, denial);
            return SubmitOutcome{job.job_id, Status(denial)};
        }
        auto info = security_->dataset(dataset);
        auto cls = info ? info->data_class : security::DataClass::application;
        streaming = details_streaming(details);
        {
            std::lock_guard lk(jobs_mu_);
            auto& entry = jobs_[job.job_id];
            entry.decision = decision.value();
            entry.data_class = cls;
            entry.dataset_id = dataset;
        }
        if (!streaming) {
            json enforced_records = json::array();
            for (const auto& record : details["records"]) {
                auto enforced = enforce_protocols(to_bytes(record.dump()),
                                                  decision.value(), dataset, cls);
                if (!enforced) {
                    crash_with_error(job.job_id, enforced.error());
                    return SubmitOutcome{job.job_id, Status(enforced.error())};
                }
                enforced_records.push_back(base64_encode(enforced.value()));
            }
            std::lock_guard lk(jobs_mu_);
            auto& rec = jobs_[job.job_id].record;
            rec.job_details["records_b64"] = enforced_records;
            rec.job_details.erase("records");
        }
    }

    // No healthy instance: the request owner learns about the high load now.
    protocol::ComponentName component = protocol::route_table(kind);
    {
        std::lock_guard lk(instances_mu_);
        auto ids = by_component_.find(component);
        bool any_healthy = false;
        if (ids != by_component_.end())
            for (const auto& id : ids->second)
                any_healthy |= instances_[id].info.health == InstanceHealth::healthy;
        if (!any_healthy) {
            Error overload{Err::Overloaded,
                           std::string("high load on ") +
                               protocol::component_name(component) +
                               ", patience is advised"};
            add_event("overloaded",
                      json{{"component", protocol::component_name(component)},
                           {"note", "patience is advised"}});
            crash_with_error(job.job_id, overload);
            return SubmitOutcome{job.job_id, Status(overload)};
        }
    }

    (void)apply_event(job.job_id, JobEvent::start, std::nullopt);
    append_wal(job.job_id, "running", "");

    if (streaming) {
        std::lock_guard lk(jobs_mu_);
        auto& entry = jobs_[job.job_id];
        entry.channel_open = true;
        entry.long_running = true;
        return SubmitOutcome{job.job_id, Status::ok_status()};
    }

    std::string job_id = job.job_id;
    enqueue_task([this, job_id] { dispatch_job(job_id); });
    return SubmitOutcome{job_id, Status::ok_status()};
}

// --- dispatch -------------------------------------------------------------------

Result<json> CoreGateway::forward_once(const protocol::JobRecord& job,
                                       const ComponentInstance& instance) {
    std::shared_ptr<ComponentChannel> channel;
    {
        std::lock_guard lk(instances_mu_);
        auto it = instances_.find(instance.instance_id);
        if (it == instances_.end())
            return Error{Err::Unreachable, "instance disappeared"};
        channel = it->second.channel;
    }
    adjust_inflight(instance.instance_id, 1);
    auto future = channel->submit(job);
    auto status = future.wait_for(std::chrono::milliseconds(opts_.dispatch_timeout_ms));
    adjust_inflight(instance.instance_id, -1);
    if (status != std::future_status::ready)
        return Error{Err::DeadlineExceeded, "dispatch timed out"};
    return future.get();
}

void CoreGateway::dispatch_job(const std::string& job_id) {
    protocol::JobRecord job;
    {
        std::lock_guard lk(jobs_mu_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end() || it->second.record.status != JobStatus::running)
            return;
        it->second.attempts = 1;
        job = it->second.record;
    }

    protocol::ComponentName component = protocol::route_table(job.job_description);
    auto first = pick_instance(component, "");
    if (!first) {
        add_event("overloaded",
                  json{{"component", protocol::component_name(component)},
                       {"note", "patience is advised"}});
        crash_with_error(job_id, first.error());
        return;
    }

    auto result = forward_once(job, first.value());
    bool timed_out = !result.ok() && result.code() == Err::DeadlineExceeded &&
                     result.error().message == "dispatch timed out";
    if (timed_out) {
        mark_suspect(first.value().instance_id);
        add_event("redirect",
                  json{{"from", first.value().instance_id},
                       {"component", protocol::component_name(component)}});
        auto second = pick_instance(component, first.value().instance_id);
        if (!second) {
            crash_with_error(job_id,
                             Error{Err::DeadlineExceeded,
                                   "dispatch timed out and no alternative instance"});
            return;
        }
        {
            std::lock_guard lk(jobs_mu_);
            auto it = jobs_.find(job_id);
            if (it == jobs_.end()) return;
            it->second.attempts = 2;
        }
        result = forward_once(job, second.value());
        if (!result.ok() && result.code() == Err::DeadlineExceeded &&
            result.error().message == "dispatch timed out") {
            mark_suspect(second.value().instance_id);
            crash_with_error(job_id, Error{Err::DeadlineExceeded,
                                           "dispatch timed out on both instances"});
            return;
        }
    }

    if (!result.ok()) {
        if (result.code() == Err::NoRemedy) {
            add_event("overloaded",
                      json{{"component", protocol::component_name(component)},
                           {"job", job_id},
                           {"note", "patience is advised"}});
            crash_with_error(job_id,
                             Error{Err::Overloaded,
                                   "high load: " + result.error().message +
                                       "; patience is advised"});
            return;
        }
        crash_with_error(job_id, result.error());
        return;
    }

    const json& outcome = result.value();

    // Inverse protocol path for retrieval results.
    if (job.job_description == JobKind::read && outcome.contains("payload_b64")) {
        auto stored = base64_decode(outcome["payload_b64"].get<std::string>());
        if (!stored) {
            crash_with_error(job_id, Error{Err::InternalError, "bad payload encoding"});
            return;
        }
        auto plain = security_->recover_payload(*stored);
        if (!plain) {
            crash_with_error(job_id, plain.error());
            return;
        }
        (void)apply_event(job_id, JobEvent::succeed,
                    protocol::JobData::payload(std::move(plain.value())));
        append_wal(job_id, "finished", "");
        return;
    }
    if (job.job_description == JobKind::analytics_retrieve &&
        outcome.contains("records_b64")) {
        json records = json::array();
        for (const auto& b64 : outcome["records_b64"]) {
            auto stored = base64_decode(b64.get<std::string>());
            if (!stored) {
                crash_with_error(job_id,
                                 Error{Err::InternalError, "bad record encoding"});
                return;
            }
            auto plain = security_->recover_payload(*stored);
            if (!plain) {
                crash_with_error(job_id, plain.error());
                return;
            }
            json doc = json::parse(to_string(plain.value()), nullptr, false);
            records.push_back(doc.is_discarded()
                                  ? json(base64_encode(plain.value()))
                                  : doc);
        }
        finish_with_result(job_id, json{{"records", records}});
        return;
    }

    // Continuous replication jobs stay running until deleted; the link they
    // created lives as long as the job.
    if (job.job_description == JobKind::replicate &&
        job.job_details.value("mode", "") == "continuous") {
        std::lock_guard lk(jobs_mu_);
        auto it = jobs_.find(job_id);
        if (it != jobs_.end()) {
            it->second.long_running = true;
            it->second.record.job_details["link"] = outcome;
        }
        return;
    }

    finish_with_result(job_id, outcome);
}

// --- GET / PUT / DELETE -------------------------------------------------------------

Result<protocol::JobRecord> CoreGateway::get_job(
    const std::string& job_id, const protocol::Credentials& creds) const {
    auto verified = authenticate(creds);
    if (!verified) return verified.error();
    std::lock_guard lk(jobs_mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end())
        return Error{Err::NotFound, "job " + job_id + " not found"};
    const auto& record = it->second.record;
    if (record.initiator.principal_id != verified.value().principal_id &&
        !verified.value().has_role(protocol::Role::admin))
        return Error{Err::AccessDenied, "only the initiator or an admin may read a job"};
    protocol::JobRecord view = record;
    view.initiator.token = "<redacted>";
    return view;
}

Status CoreGateway::stream_put(const std::string& job_id, const Bytes& chunk,
                               bool final_chunk, const protocol::Credentials& creds) {
    auto verified = authenticate(creds);
    if (!verified) return Status(verified.error());

    JobKind kind;
    json details;
    security::AccessDecision decision;
    security::DataClass cls;
    std::string dataset;
    Bytes accumulated;
    {
        std::unique_lock lk(jobs_mu_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end())
            return Status(Err::NotFound, "job " + job_id + " not found");
        auto& entry = it->second;
        if (entry.record.initiator.principal_id != verified.value().principal_id &&
            !verified.value().has_role(protocol::Role::admin))
            return Status(Err::AccessDenied, "not the job initiator");
        if (!entry.channel_open || entry.record.status != JobStatus::running)
            return Status(Err::ChannelClosed,
                          "job " + job_id + " has no open channel");
        kind = entry.record.job_description;
        details = entry.record.job_details;
        decision = entry.decision;
        cls = entry.data_class;
        dataset = entry.dataset_id;
        entry.stream_buffer.insert(entry.stream_buffer.end(), chunk.begin(),
                                   chunk.end());
        accumulated = entry.stream_buffer;
    }

    Status forward_status = Status::ok_status();
    std::uint64_t batch_records = 0;
    if (kind == JobKind::write || kind == JobKind::update) {
        auto enforced = enforce_protocols(accumulated, decision, dataset, cls);
        if (!enforced) {
            crash_with_error(job_id, enforced.error());
            return Status(enforced.error());
        }
        json patch = details;
        patch["value_b64"] = base64_encode(enforced.value());
        patch.erase("stream");
        forward_status = forward_stream_batch(job_id, patch);
    } else if (kind == JobKind::analytics_save) {
        if (!chunk.empty()) {
            json batch = json::parse(to_string(chunk), nullptr, false);
            if (batch.is_discarded() || !batch.is_array())
                return Status(Err::SchemaViolation,
                              "streamed analytics chunks must be JSON arrays");
            json records_b64 = json::array();
            for (const auto& record : batch) {
                auto enforced =
                    enforce_protocols(to_bytes(record.dump()), decision, dataset, cls);
                if (!enforced) {
                    crash_with_error(job_id, enforced.error());
                    return Status(enforced.error());
                }
                records_b64.push_back(base64_encode(enforced.value()));
            }
            batch_records = records_b64.size();
            json patch = details;
            patch["records_b64"] = records_b64;
            patch.erase("records");
            patch.erase("stream");
            forward_status = forward_stream_batch(job_id, patch);
        }
    } else {
        return Status(Err::ChannelClosed,
                      "job kind does not accept streamed data");
    }

    if (!forward_status.ok()) {
        crash_with_error(job_id, forward_status.error());
        return forward_status;
    }

    std::lock_guard lk(jobs_mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return Status(Err::NotFound, "job vanished");
    it->second.stream_records += batch_records;
    if (final_chunk) {
        it->second.channel_open = false;
        json result{{"ok", true}};
        if (kind == JobKind::analytics_save)
            result["count"] = it->second.stream_records;
        else
            result["bytes"] = it->second.stream_buffer.size();
        auto next = protocol::transition(it->second.record.status, JobEvent::succeed);
        if (next) {
            it->second.record.status = next.value();
            it->second.record.data = protocol::JobData::result(result);
            it->second.record.updated_at = ++logical_clock_;
            jobs_cv_.notify_all();
        }
    }
    return Status::ok_status();
}

Status CoreGateway::forward_stream_batch(const std::string& job_id,
                                         const json& details_patch) {
    protocol::JobRecord job;
    {
        std::lock_guard lk(jobs_mu_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end()) return Status(Err::NotFound, "job vanished");
        job = it->second.record;
    }
    job.job_details = details_patch;
    job.job_details["job_id"] = job_id;

    auto component = protocol::route_table(job.job_description);
    auto instance = pick_instance(component, "");
    if (!instance) return Status(instance.error());
    auto result = forward_once(job, instance.value());
    if (!result.ok()) return Status(result.error());
    return Status::ok_status();
}

Status CoreGateway::delete_job(const std::string& job_id,
                               const protocol::Credentials& creds) {
    auto verified = authenticate(creds);
    if (!verified) return Status(verified.error());

    JobKind kind;
    bool was_running = false;
    {
        std::lock_guard lk(jobs_mu_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end())
            return Status(Err::NotFound, "job " + job_id + " not found");
        const auto& record = it->second.record;
        if (record.initiator.principal_id != verified.value().principal_id &&
            !verified.value().has_role(protocol::Role::admin))
            return Status(Err::AccessDenied, "only the initiator or an admin may delete");
        kind = record.job_description;
        was_running = record.status == JobStatus::running;
        if (was_running) {
            it->second.record.status = JobStatus::crashed;
            it->second.record.data =
                protocol::JobData::error(Error{Err::Cancelled, "cancelled"});
            it->second.record.updated_at = ++logical_clock_;
        }
        jobs_.erase(it);
        jobs_cv_.notify_all();
    }

    if (was_running) {
        // Cancellation signal to the owning component.
        auto component = protocol::route_table(kind);
        std::vector<std::shared_ptr<ComponentChannel>> channels;
        {
            std::lock_guard lk(instances_mu_);
            auto ids = by_component_.find(component);
            if (ids != by_component_.end())
                for (const auto& id : ids->second)
                    channels.push_back(instances_[id].channel);
        }
        for (auto& c : channels) c->cancel(job_id);
    }
    append_wal(job_id, "deleted", was_running ? "cancelled" : "");
    return Status::ok_status();
}

// --- introspection ------------------------------------------------------------

Result<protocol::JobRecord> CoreGateway::wait_for_job(const std::string& job_id,
                                                      std::uint64_t timeout_ms) const {
    std::unique_lock lk(jobs_mu_);
    auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
        auto it = jobs_.find(job_id);
        if (it == jobs_.end())
            return Error{Err::NotFound, "job " + job_id + " not found"};
        if (protocol::is_terminal(it->second.record.status)) {
            protocol::JobRecord view = it->second.record;
            view.initiator.token = "<redacted>";
            return view;
        }
        if (jobs_cv_.wait_until(lk, deadline) == std::cv_status::timeout)
            return Error{Err::DeadlineExceeded,
                         "job " + job_id + " still running after timeout"};
    }
}

int CoreGateway::dispatch_attempts(const std::string& job_id) const {
    std::lock_guard lk(jobs_mu_);
    auto it = jobs_.find(job_id);
    return it == jobs_.end() ? -1 : it->second.attempts;
}

std::size_t CoreGateway::job_count() const {
    std::lock_guard lk(jobs_mu_);
    return jobs_.size();
}

json CoreGateway::handle_self_job(const protocol::JobRecord& job) {
    if (job.job_description != JobKind::status_query)
        return json{{"error", "unsupported self job"}};
    std::string target = job.job_details.value("job_id", "");
    // The initiator was authenticated at submit time.
    std::lock_guard lk(jobs_mu_);
    auto it = jobs_.find(target);
    if (it == jobs_.end()) return json{{"found", false}, {"job_id", target}};
    const auto& record = it->second.record;
    if (record.initiator.principal_id != job.initiator.principal_id &&
        !job.initiator.has_role(protocol::Role::admin))
        return json{{"found", false}, {"job_id", target}};
    return json{{"found", true},
                {"job_id", target},
                {"status", protocol::job_status_name(record.status)},
                {"job_description", protocol::job_kind_name(record.job_description)}};
}

}  // namespace budamaf::core
