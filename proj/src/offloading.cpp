#include "budamaf/offloading.hpp"

#include <algorithm>

#include "budamaf/digest.hpp"

namespace budamaf::offloading {

const char* store_state_name(StoreState s) {
    switch (s) {
        case StoreState::creating: return "creating";
        case StoreState::ready: return "ready";
        case StoreState::scaling: return "scaling";
        case StoreState::relocating: return "relocating";
        case StoreState::destroyed: return "destroyed";
    }
    return "ready";
}

json store_descriptor_to_json(const DataStoreDescriptor& d) {
    json machines = json::array();
    for (const auto& m : d.instances)
        machines.push_back(json{{"machine_id", m.machine_id},
                                {"provider_id", m.provider_id}});
    return json{{"store_id", d.store_id},
                {"kind", wrappers::store_kind_name(d.kind)},
                {"provider_id", d.provider_id},
                {"access_point", d.access_point},
                {"instances", machines},
                {"state", store_state_name(d.state)},
                {"acid", d.acid},
                {"owner", d.owner}};
}

json replication_link_to_json(const ReplicationLink& l) {
    return json{{"link_id", l.link_id},
                {"src", {{"store_id", l.src_store}, {"collection", l.src_collection}}},
                {"dst", {{"store_id", l.dst_store}, {"collection", l.dst_collection}}},
                {"mode", l.mode == ReplicationLink::Mode::one_shot ? "one_shot"
                                                                   : "continuous"},
                {"last_seq", l.last_seq}};
}

json offload_plan_to_json(const OffloadPlan& p) {
    json j{{"store_id", p.store_id},
           {"trigger_queue_depth", p.trigger_queue_depth},
           {"action", p.action == OffloadPlan::Action::redirect ? "redirect" : "scale"},
           {"created_at", p.created_at}};
    if (p.action == OffloadPlan::Action::redirect)
        j["redirect_store"] = p.redirect_store;
    else {
        j["scale_provider"] = p.scale_provider;
        j["scale_machines"] = p.scale_machines;
    }
    return j;
}

json migration_report_to_json(const MigrationReport& r) {
    return json{{"records_moved", r.records_moved},
                {"bytes_moved", r.bytes_moved},
                {"duration_ms", r.duration_ms},
                {"epochs_reapplied", r.epochs_reapplied}};
}

QueryResult QueryResult::from_response(const wrappers::WrapperResponse& r) {
    QueryResult out;
    out.ok = r.ok;
    out.payload = r.payload;
    out.rows = r.rows;
    out.count = r.count;
    out.error = r.error;
    return out;
}

QueryResult QueryResult::failure(Error e) {
    QueryResult out;
    out.ok = false;
    out.error = std::move(e);
    return out;
}

json query_result_to_json(const QueryResult& r) {
    json j{{"ok", r.ok}};
    if (r.payload) j["payload_b64"] = base64_encode(*r.payload);
    if (r.rows) j["rows"] = *r.rows;
    if (r.count) j["count"] = *r.count;
    if (r.error)
        j["error"] = json{{"code", err_name(r.error->code)},
                          {"message", r.error->message}};
    return j;
}

OffloadingApis::OffloadingApis(security::SecurityEngine* security,
                               CapacityPool* capacity)
    : OffloadingApis(security, capacity, Options{}) {}

OffloadingApis::OffloadingApis(security::SecurityEngine* security,
                               CapacityPool* capacity, Options opts)
    : security_(security), capacity_(capacity), opts_(std::move(opts)) {}

std::string OffloadingApis::next_id(const char* prefix) {
    return std::string(prefix) + "-" + std::to_string(id_seq_.fetch_add(1) + 1);
}

// --- wrapper registry -------------------------------------------------------

Result<std::string> OffloadingApis::register_wrapper(
    const WrapperRegistration& reg, std::shared_ptr<wrappers::WrapperClient> client) {
    if (!client) return Error{Err::Unreachable, "wrapper client missing"};
    auto probe = client->health();
    if (!probe)
        return Error{Err::Unreachable,
                     "wrapper endpoint " + reg.endpoint + " did not answer the probe"};
    std::lock_guard lk(wrappers_mu_);
    std::string wrapper_id = reg.wrapper_id.empty() ? next_id("w") : reg.wrapper_id;
    if (wrappers_.count(wrapper_id) > 0)
        return Error{Err::DuplicateId, "wrapper " + wrapper_id + " already registered"};
    WrapperRegistration stored = reg;
    stored.wrapper_id = wrapper_id;
    wrappers_[wrapper_id] = WrapperHandle{stored, std::move(client), 0};
    by_kind_[reg.kind].push_back(wrapper_id);
    return wrapper_id;
}

std::vector<WrapperRegistration> OffloadingApis::wrapper_registrations() const {
    std::lock_guard lk(wrappers_mu_);
    std::vector<WrapperRegistration> out;
    for (const auto& [_, handle] : wrappers_) out.push_back(handle.registration);
    return out;
}

std::map<std::string, std::uint64_t> OffloadingApis::wrapper_dispatch_counts() const {
    std::lock_guard lk(wrappers_mu_);
    std::map<std::string, std::uint64_t> out;
    for (const auto& [id, handle] : wrappers_) out[id] = handle.dispatches;
    return out;
}

Result<std::shared_ptr<wrappers::WrapperClient>> OffloadingApis::wrapper_for_kind(
    wrappers::StoreKind kind, std::string* wrapper_id) {
    std::lock_guard lk(wrappers_mu_);
    auto it = by_kind_.find(kind);
    if (it == by_kind_.end() || it->second.empty())
        return Error{Err::NoWrapperForKind,
                     std::string("no wrapper registered for kind ") +
                         wrappers::store_kind_name(kind)};
    std::uint64_t cursor = rr_cursor_[kind]++;
    const std::string& id = it->second[cursor % it->second.size()];
    auto& handle = wrappers_[id];
    handle.dispatches++;
    if (wrapper_id) *wrapper_id = id;
    return handle.client;
}

// --- store catalog & lifecycle ------------------------------------------------

Result<OffloadingApis::StoreRuntime> OffloadingApis::store_runtime(
    const std::string& store_id) const {
    std::lock_guard lk(catalog_mu_);
    auto it = stores_.find(store_id);
    if (it == stores_.end())
        return Error{Err::StoreNotFound, "store " + store_id + " not in catalog"};
    return it->second;
}

Result<DataStoreDescriptor> OffloadingApis::create_store(
    wrappers::StoreKind kind, const std::string& provider_id,
    const std::vector<std::string>& machines, const std::string& owner,
    const std::string& preferred_id) {
    std::string wrapper_id;
    auto client = wrapper_for_kind(kind, &wrapper_id);
    if (!client) return client.error();
    auto caps = client.value()->capabilities();
    if (!caps) return Error{Err::Unreachable, "wrapper did not report capabilities"};

    if (auto s = capacity_->reserve(provider_id, static_cast<std::uint32_t>(machines.size()));
        !s.ok())
        return s.error();

    DataStoreDescriptor desc;
    desc.store_id = preferred_id.empty() ? next_id("s") : preferred_id;
    desc.kind = kind;
    desc.provider_id = provider_id;
    desc.access_point = "store://" + provider_id + "/" + desc.store_id;
    for (const auto& m : machines) desc.instances.push_back({m, provider_id});
    desc.state = StoreState::ready;
    desc.acid = caps.value().transactions;
    desc.owner = owner;

    std::lock_guard lk(catalog_mu_);
    if (stores_.count(desc.store_id) > 0) {
        capacity_->release(provider_id, static_cast<std::uint32_t>(machines.size()));
        return Error{Err::DuplicateId, "store " + desc.store_id + " already exists"};
    }
    stores_[desc.store_id] = StoreRuntime{desc, {}};
    return desc;
}

Status OffloadingApis::destroy_store(const std::string& store_id) {
    DataStoreDescriptor desc;
    {
        std::lock_guard lk(catalog_mu_);
        auto it = stores_.find(store_id);
        if (it == stores_.end())
            return Status(Err::StoreNotFound, "store " + store_id + " not in catalog");
        desc = it->second.desc;
        stores_.erase(it);
    }
    {
        std::lock_guard lk(links_mu_);
        for (auto it = links_.begin(); it != links_.end();) {
            if (it->second.src_store == store_id || it->second.dst_store == store_id)
                it = links_.erase(it);
            else
                ++it;
        }
    }
    for (const auto& m : desc.instances) capacity_->release(m.provider_id, 1);
    // Engine-side cleanup so a recreated id starts empty.
    if (auto client = wrapper_for_kind(desc.kind)) {
        std::vector<std::string> colls;
        if (auto in_proc = std::dynamic_pointer_cast<wrappers::InProcessWrapperClient>(
                client.value()))
            colls = in_proc->wrapper()->collections(store_id);
        for (const auto& coll : colls)
            (void)client.value()->drop_collection(store_id, coll);
    }
    return Status::ok_status();
}

Result<DataStoreDescriptor> OffloadingApis::scale_store(
    const std::string& store_id, const std::vector<std::string>& machines,
    const std::string& provider_id) {
    if (machines.empty())
        return Error{Err::SchemaViolation, "scale requires a non-empty machine list"};
    std::string provider;
    {
        std::lock_guard lk(catalog_mu_);
        auto it = stores_.find(store_id);
        if (it == stores_.end())
            return Error{Err::StoreNotFound, "store " + store_id + " not in catalog"};
        if (it->second.desc.state != StoreState::ready)
            return Error{Err::StoreNotReady,
                         "store " + store_id + " is " +
                             store_state_name(it->second.desc.state)};
        provider = provider_id.empty() ? it->second.desc.provider_id : provider_id;
        if (auto s = capacity_->reserve(provider,
                                        static_cast<std::uint32_t>(machines.size()));
            !s.ok())
            return s.error();
        it->second.desc.state = StoreState::scaling;
    }

    if (opts_.scale_hook) opts_.scale_hook(store_id);

    // Writes queued while scaling are applied before the store re-opens.
    while (true) {
        std::vector<wrappers::UniformQuery> queued;
        {
            std::lock_guard lk(catalog_mu_);
            auto& rt = stores_[store_id];
            queued.swap(rt.scaling_writes);
            if (queued.empty()) {
                for (const auto& m : machines)
                    rt.desc.instances.push_back({m, provider});
                rt.desc.state = StoreState::ready;
                return rt.desc;
            }
        }
        for (const auto& q : queued) {
            std::lock_guard fl(fences_mu_);
            CollectionRef ref{q.store_id, q.collection};
            auto fence = fences_.find(ref);
            if (fence != fences_.end() && fence->second.active)
                fence->second.pending.push_back(q);
            log_write(ref, q);
            (void)forward(q, true);
        }
    }
}

Status OffloadingApis::release_instances(const std::string& store_id,
                                         std::uint32_t machines) {
    std::lock_guard lk(catalog_mu_);
    auto it = stores_.find(store_id);
    if (it == stores_.end())
        return Status(Err::StoreNotFound, "store " + store_id + " not in catalog");
    auto& inst = it->second.desc.instances;
    std::uint32_t removable =
        static_cast<std::uint32_t>(inst.size() > 1 ? inst.size() - 1 : 0);
    std::uint32_t n = std::min(machines, removable);
    for (std::uint32_t i = 0; i < n; ++i) {
        capacity_->release(inst.back().provider_id, 1);
        inst.pop_back();
    }
    return Status::ok_status();
}

Result<DataStoreDescriptor> OffloadingApis::relocate_store(
    const std::string& store_id, const std::string& new_provider) {
    DataStoreDescriptor desc;
    {
        std::lock_guard lk(catalog_mu_);
        auto it = stores_.find(store_id);
        if (it == stores_.end())
            return Error{Err::StoreNotFound, "store " + store_id + " not in catalog"};
        if (it->second.desc.state != StoreState::ready)
            return Error{Err::StoreNotReady, "store " + store_id + " is busy"};
        desc = it->second.desc;
    }
    if (!capacity_->provider_region(new_provider))
        return Error{Err::CapacityExceeded, "unknown provider " + new_provider};
    auto machines = static_cast<std::uint32_t>(desc.instances.size());
    if (auto s = capacity_->reserve(new_provider, machines); !s.ok())
        return s.error();

    {
        std::lock_guard lk(catalog_mu_);
        stores_[store_id].desc.state = StoreState::relocating;
    }

    // Create-on-target + verified copy + destroy-on-source, realized against
    // the shared embedded fabric through a staging namespace.
    auto client = wrapper_for_kind(desc.kind);
    if (!client) {
        capacity_->release(new_provider, machines);
        std::lock_guard lk(catalog_mu_);
        stores_[store_id].desc.state = StoreState::ready;
        return client.error();
    }
    std::vector<std::string> colls;
    if (auto in_proc =
            std::dynamic_pointer_cast<wrappers::InProcessWrapperClient>(client.value()))
        colls = in_proc->wrapper()->collections(store_id);

    for (const auto& coll : colls) {
        CollectionRef src{store_id, coll};
        CollectionRef staging{store_id, coll + ".__relocate"};
        auto copied = copy_collection_verified(src, staging, MigrationFault{});
        (void)client.value()->drop_collection(staging.store_id, staging.collection);
        if (!copied) {
            capacity_->release(new_provider, machines);
            std::lock_guard lk(catalog_mu_);
            stores_[store_id].desc.state = StoreState::ready;
            return Error{Err::MigrationFailed,
                         "relocation copy failed for collection " + coll + ": " +
                             copied.error().message};
        }
    }

    std::lock_guard lk(catalog_mu_);
    auto& rt = stores_[store_id];
    for (const auto& m : rt.desc.instances) capacity_->release(m.provider_id, 1);
    std::vector<MachineRef> moved;
    for (std::size_t i = 0; i < rt.desc.instances.size(); ++i)
        moved.push_back({"m-" + new_provider + "-" + store_id + "-" +
                             std::to_string(i + 1),
                         new_provider});
    rt.desc.instances = std::move(moved);
    rt.desc.provider_id = new_provider;
    rt.desc.access_point = "store://" + new_provider + "/" + store_id;
    rt.desc.state = StoreState::ready;
    return rt.desc;
}

std::optional<DataStoreDescriptor> OffloadingApis::store(
    const std::string& store_id) const {
    std::lock_guard lk(catalog_mu_);
    auto it = stores_.find(store_id);
    if (it == stores_.end()) return std::nullopt;
    return it->second.desc;
}

std::vector<DataStoreDescriptor> OffloadingApis::stores() const {
    std::lock_guard lk(catalog_mu_);
    std::vector<DataStoreDescriptor> out;
    for (const auto& [_, rt] : stores_) out.push_back(rt.desc);
    return out;
}

// --- data plane -----------------------------------------------------------------

CollectionRef OffloadingApis::resolve_alias(CollectionRef ref) const {
    std::lock_guard lk(fences_mu_);
    for (int depth = 0; depth < 16; ++depth) {
        auto it = aliases_.find(ref);
        if (it == aliases_.end()) return ref;
        ref = it->second;
    }
    return ref;
}

void OffloadingApis::log_write(const CollectionRef& at,
                               const wrappers::UniformQuery& q) {
    auto& log = write_logs_[at];
    log.entries.emplace_back(log.next_seq++, q);
}

QueryResult OffloadingApis::forward(const wrappers::UniformQuery& q, bool direct) {
    auto rt = store_runtime(q.store_id);
    if (!rt) return QueryResult::failure(rt.error());
    auto client = wrapper_for_kind(rt.value().desc.kind);
    if (!client) return QueryResult::failure(client.error());

    wrappers::WrapperRequest req;
    req.request_id = next_id("r");
    req.query = q;
    req.direct = direct;
    auto resp = client.value()->handle(req);
    if (!resp)
        return QueryResult::failure(
            Error{Err::WrapperError, "wrapper transport failed: " + resp.error().message});
    return QueryResult::from_response(resp.value());
}

QueryResult OffloadingApis::dispatch(const wrappers::UniformQuery& query) {
    wrappers::UniformQuery q = query;
    CollectionRef ref = resolve_alias({q.store_id, q.collection});
    if (q.op == wrappers::QueryOp::read) {
        std::lock_guard lk(fences_mu_);
        auto it = read_redirects_.find(ref);
        if (it != read_redirects_.end()) ref = it->second;
    }
    q.store_id = ref.store_id;
    q.collection = ref.collection;

    auto rt = store_runtime(q.store_id);
    if (!rt) return QueryResult::failure(rt.error());
    const auto& desc = rt.value().desc;

    if (q.txn_id && !desc.acid)
        return QueryResult::failure(
            Error{Err::CapabilityMissing,
                  std::string(wrappers::store_kind_name(desc.kind)) +
                      " stores do not pass through transactions"});

    bool is_write = q.op == wrappers::QueryOp::write ||
                    q.op == wrappers::QueryOp::update ||
                    q.op == wrappers::QueryOp::del;

    if (desc.state == StoreState::creating || desc.state == StoreState::destroyed)
        return QueryResult::failure(
            Error{Err::StoreNotReady, "store " + q.store_id + " is not ready"});

    if (opts_.require_enforced_writes && is_write &&
        q.collection.rfind("__", 0) != 0 && q.op != wrappers::QueryOp::del &&
        !security::SecurityEngine::is_enforced_payload(q.payload))
        return QueryResult::failure(
            Error{Err::TransformFailure,
                  "payload reached the wrapper boundary without protocol "
                  "enforcement"});

    if (desc.state == StoreState::scaling && is_write) {
        std::lock_guard lk(catalog_mu_);
        auto it = stores_.find(q.store_id);
        if (it != stores_.end() && it->second.desc.state == StoreState::scaling) {
            if (it->second.scaling_writes.size() >= opts_.write_queue_bound)
                return QueryResult::failure(
                    Error{Err::StoreNotReady, "scaling write queue full"});
            it->second.scaling_writes.push_back(q);
            QueryResult accepted;
            accepted.ok = true;
            accepted.count = 1;
            return accepted;
        }
        // Scaling finished while we were looking; fall through.
    }

    if (!is_write) return forward(q, false);

    std::lock_guard lk(fences_mu_);
    if (!q.txn_id) {
        auto fence = fences_.find(ref);
        if (fence != fences_.end() && fence->second.active)
            fence->second.pending.push_back(q);
        log_write(ref, q);
    }
    return forward(q, false);
}

std::future<wrappers::WrapperResponse> OffloadingApis::dispatch_async(
    wrappers::UniformQuery q) {
    auto fail = [&](Error e) {
        std::promise<wrappers::WrapperResponse> p;
        p.set_value(wrappers::WrapperResponse::make_error("", std::move(e)));
        return p.get_future();
    };
    if (q.op != wrappers::QueryOp::read)
        return fail(Error{Err::SchemaViolation, "async dispatch is read-only"});

    CollectionRef ref = resolve_alias({q.store_id, q.collection});
    {
        std::lock_guard lk(fences_mu_);
        auto it = read_redirects_.find(ref);
        if (it != read_redirects_.end()) ref = it->second;
    }
    q.store_id = ref.store_id;
    q.collection = ref.collection;

    auto rt = store_runtime(q.store_id);
    if (!rt) return fail(rt.error());
    auto client = wrapper_for_kind(rt.value().desc.kind);
    if (!client) return fail(client.error());

    wrappers::WrapperRequest req;
    req.request_id = next_id("r");
    req.query = std::move(q);
    return client.value()->handle_async(std::move(req));
}

QueryResult OffloadingApis::txn_control(const std::string& store_id,
                                        const wrappers::TxnControl& c) {
    auto rt = store_runtime(store_id);
    if (!rt) return QueryResult::failure(rt.error());
    if (!rt.value().desc.acid)
        return QueryResult::failure(
            Error{Err::CapabilityMissing,
                  std::string(wrappers::store_kind_name(rt.value().desc.kind)) +
                      " stores do not pass through transactions"});
    auto client = wrapper_for_kind(rt.value().desc.kind);
    if (!client) return QueryResult::failure(client.error());
    wrappers::WrapperRequest req;
    req.request_id = next_id("r");
    req.control = c;
    auto resp = client.value()->handle(req);
    if (!resp)
        return QueryResult::failure(
            Error{Err::WrapperError, "wrapper transport failed"});
    return QueryResult::from_response(resp.value());
}

Result<std::vector<wrappers::SnapshotEntry>> OffloadingApis::snapshot_collection(
    const std::string& store_id, const std::string& collection) {
    auto rt = store_runtime(store_id);
    if (!rt) return rt.error();
    auto client = wrapper_for_kind(rt.value().desc.kind);
    if (!client) return client.error();
    return client.value()->snapshot(store_id, collection);
}

std::uint64_t OffloadingApis::store_queue_depth(const std::string& store_id) const {
    wrappers::StoreKind kind;
    {
        std::lock_guard lk(catalog_mu_);
        auto it = stores_.find(store_id);
        if (it == stores_.end()) return 0;
        kind = it->second.desc.kind;
    }
    std::uint64_t depth = 0;
    std::lock_guard lk(wrappers_mu_);
    auto ids = by_kind_.find(kind);
    if (ids == by_kind_.end()) return 0;
    for (const auto& id : ids->second) {
        auto handle = wrappers_.find(id);
        if (handle == wrappers_.end()) continue;
        auto h = handle->second.client->health();
        if (h) depth += h.value().queue_depth;
    }
    return depth;
}

// --- federation data operations ----------------------------------------------

Status OffloadingApis::apply_at(const CollectionRef& at,
                                const wrappers::UniformQuery& templ) {
    wrappers::UniformQuery q = templ;
    q.store_id = at.store_id;
    q.collection = at.collection;
    q.txn_id.reset();
    auto result = forward(q, true);
    if (!result.ok && result.error &&
        !(q.op == wrappers::QueryOp::update && result.error->code == Err::NotFound) &&
        !(q.op == wrappers::QueryOp::del))
        return Status(result.error->code, result.error->message);
    return Status::ok_status();
}

Result<OffloadingApis::CopyStats> OffloadingApis::copy_collection_verified(
    const CollectionRef& src, const CollectionRef& dst, const MigrationFault& fault) {
    auto src_rt = store_runtime(src.store_id);
    if (!src_rt) return src_rt.error();
    auto dst_rt = store_runtime(dst.store_id);
    if (!dst_rt) return dst_rt.error();
    auto src_client = wrapper_for_kind(src_rt.value().desc.kind);
    if (!src_client) return src_client.error();
    auto dst_client = wrapper_for_kind(dst_rt.value().desc.kind);
    if (!dst_client) return dst_client.error();

    // Phase 1: snapshot copy with per-record digests.
    std::vector<wrappers::SnapshotEntry> entries;
    auto snap = src_client.value()->snapshot(src.store_id, src.collection);
    if (snap)
        entries = std::move(snap.value());
    else if (snap.error().code != Err::UnknownCollection)
        return snap.error();

    CopyStats stats;
    std::int64_t index = 0;
    for (const auto& e : entries) {
        Bytes copied = e.value;
        if (index == fault.corrupt_record_index && !copied.empty())
            copied[0] ^= 0x01;
        ++index;
        wrappers::UniformQuery w;
        w.op = wrappers::QueryOp::write;
        w.store_id = dst.store_id;
        w.collection = dst.collection;
        w.key = e.key;
        w.payload = std::move(copied);
        auto res = forward(w, true);
        if (!res.ok) {
            (void)dst_client.value()->drop_collection(dst.store_id, dst.collection);
            return Error{Err::VerificationFailed,
                         "copy failed at key " + e.key + ": " +
                             (res.error ? res.error->message : "unknown")};
        }
        stats.records++;
        stats.bytes += e.value.size();
    }

    // Phase 2: verify every digest at the destination.
    std::map<std::string, std::string> dst_digests;
    if (!entries.empty()) {
        auto verify = dst_client.value()->snapshot(dst.store_id, dst.collection);
        if (!verify) {
            (void)dst_client.value()->drop_collection(dst.store_id, dst.collection);
            return Error{Err::VerificationFailed, "destination snapshot failed"};
        }
        for (const auto& e : verify.value()) dst_digests[e.key] = e.digest;
    }
    for (const auto& e : entries) {
        auto it = dst_digests.find(e.key);
        if (it == dst_digests.end() || it->second != e.digest) {
            (void)dst_client.value()->drop_collection(dst.store_id, dst.collection);
            return Error{Err::VerificationFailed,
                         "digest mismatch for key " + e.key};
        }
    }
    return stats;
}

Result<MigrationReport> OffloadingApis::migrate(const CollectionRef& src,
                                                const CollectionRef& dst,
                                                const MigrationFault& fault) {
    if (src == dst)
        return Error{Err::MigrationFailed, "source and destination are identical"};
    auto src_rt = store_runtime(src.store_id);
    if (!src_rt) return src_rt.error();
    auto dst_rt = store_runtime(dst.store_id);
    if (!dst_rt) return dst_rt.error();
    if (src_rt.value().desc.state != StoreState::ready ||
        dst_rt.value().desc.state != StoreState::ready)
        return Error{Err::StoreNotReady, "both stores must be ready to migrate"};

    auto pre = snapshot_collection(dst.store_id, dst.collection);
    if (pre && !pre.value().empty())
        return Error{Err::MigrationFailed, "destination collection is not empty"};

    std::uint64_t t0 = ++clock_;
    {
        std::lock_guard lk(fences_mu_);
        auto& fence = fences_[src];
        fence.active = true;
        fence.epoch++;
        fence.pending.clear();
    }

    auto copied = copy_collection_verified(src, dst, fault);
    if (!copied) {
        std::lock_guard lk(fences_mu_);
        fences_.erase(src);
        return copied.error();
    }

    MigrationReport report;
    report.records_moved = copied.value().records;
    report.bytes_moved = copied.value().bytes;

    // Cutover: re-apply fenced writes, point readers at dst, delete at src.
    {
        std::lock_guard lk(fences_mu_);
        auto& fence = fences_[src];
        for (const auto& q : fence.pending) {
            (void)apply_at(dst, q);
            report.epochs_reapplied++;
        }
        fences_.erase(src);
        aliases_[src] = dst;
        write_logs_.erase(src);
    }
    {
        auto src_client = wrapper_for_kind(src_rt.value().desc.kind);
        if (src_client)
            (void)src_client.value()->drop_collection(src.store_id, src.collection);
    }
    report.duration_ms = ++clock_ - t0;
    return report;
}

Result<ReplicationLink> OffloadingApis::replicate(const CollectionRef& src,
                                                  const CollectionRef& dst,
                                                  ReplicationLink::Mode mode) {
    if (src == dst)
        return Error{Err::LinkExists, "source and destination are identical"};
    auto src_rt = store_runtime(src.store_id);
    if (!src_rt) return src_rt.error();
    auto dst_rt = store_runtime(dst.store_id);
    if (!dst_rt) return dst_rt.error();
    if (src_rt.value().desc.state != StoreState::ready ||
        dst_rt.value().desc.state != StoreState::ready)
        return Error{Err::StoreNotReady, "both stores must be ready to replicate"};

    {
        std::lock_guard lk(links_mu_);
        for (const auto& [_, l] : links_)
            if (l.src_store == src.store_id && l.src_collection == src.collection &&
                l.dst_store == dst.store_id && l.dst_collection == dst.collection)
                return Error{Err::LinkExists, "link already exists"};
    }

    std::uint64_t base_seq;
    {
        std::lock_guard lk(fences_mu_);
        base_seq = write_logs_[src].next_seq;
    }

    auto copied = copy_collection_verified(src, dst, MigrationFault{});
    if (!copied) return copied.error();

    ReplicationLink link;
    link.link_id = next_id("l");
    link.src_store = src.store_id;
    link.src_collection = src.collection;
    link.dst_store = dst.store_id;
    link.dst_collection = dst.collection;
    link.mode = mode;
    link.last_seq = base_seq == 0 ? 0 : base_seq - 1;

    std::lock_guard lk(links_mu_);
    links_[link.link_id] = link;
    return link;
}

Status OffloadingApis::remove_link(const std::string& link_id) {
    std::lock_guard lk(links_mu_);
    if (links_.erase(link_id) == 0)
        return Status(Err::NotFound, "link " + link_id + " not found");
    return Status::ok_status();
}

Result<std::uint64_t> OffloadingApis::run_sync_cycle(const std::string& link_id) {
    ReplicationLink link;
    {
        std::lock_guard lk(links_mu_);
        auto it = links_.find(link_id);
        if (it == links_.end())
            return Error{Err::NotFound, "link " + link_id + " not found"};
        link = it->second;
    }
    if (link.mode != ReplicationLink::Mode::continuous) return std::uint64_t{0};

    std::vector<std::pair<std::uint64_t, wrappers::UniformQuery>> due;
    {
        std::lock_guard lk(fences_mu_);
        auto log = write_logs_.find({link.src_store, link.src_collection});
        if (log != write_logs_.end())
            for (const auto& entry : log->second.entries)
                if (entry.first > link.last_seq) due.push_back(entry);
    }
    std::sort(due.begin(), due.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::uint64_t shipped = 0;
    std::uint64_t max_seq = link.last_seq;
    for (const auto& [seq, q] : due) {
        (void)apply_at({link.dst_store, link.dst_collection}, q);
        max_seq = seq;
        ++shipped;
    }
    if (shipped > 0) {
        std::lock_guard lk(links_mu_);
        auto it = links_.find(link_id);
        if (it != links_.end()) it->second.last_seq = max_seq;
    }
    return shipped;
}

std::uint64_t OffloadingApis::run_all_sync_cycles() {
    std::vector<std::string> ids;
    {
        std::lock_guard lk(links_mu_);
        for (const auto& [id, _] : links_) ids.push_back(id);
    }
    std::uint64_t total = 0;
    for (const auto& id : ids) {
        auto shipped = run_sync_cycle(id);
        if (shipped) total += shipped.value();
    }
    return total;
}

std::vector<ReplicationLink> OffloadingApis::links() const {
    std::lock_guard lk(links_mu_);
    std::vector<ReplicationLink> out;
    for (const auto& [_, l] : links_) out.push_back(l);
    return out;
}

Result<OffloadPlan> OffloadingApis::offload(const std::string& store_id) {
    auto rt = store_runtime(store_id);
    if (!rt) return rt.error();

    OffloadPlan plan;
    plan.store_id = store_id;
    plan.trigger_queue_depth = store_queue_depth(store_id);
    plan.created_at = ++clock_;

    // A continuous replica of the hot collections lets us redirect reads.
    std::vector<ReplicationLink> replicas;
    {
        std::lock_guard lk(links_mu_);
        for (const auto& [_, l] : links_)
            if (l.src_store == store_id && l.mode == ReplicationLink::Mode::continuous)
                replicas.push_back(l);
    }
    if (!replicas.empty()) {
        plan.action = OffloadPlan::Action::redirect;
        plan.redirect_store = replicas.front().dst_store;
        {
            std::lock_guard lk(fences_mu_);
            for (const auto& l : replicas)
                read_redirects_[{l.src_store, l.src_collection}] = {l.dst_store,
                                                                    l.dst_collection};
        }
        std::lock_guard lk(plans_mu_);
        plans_.push_back(plan);
        return plan;
    }

    auto offer = capacity_->best_scale_offer(opts_.scale_step, opts_.user_region);
    if (!offer)
        return Error{Err::NoRemedy,
                     "no replica exists and no provider has free capacity"};
    // best_scale_offer already reserved the machines; hand them to the store.
    {
        std::lock_guard lk(catalog_mu_);
        auto it = stores_.find(store_id);
        if (it != stores_.end()) {
            for (const auto& m : offer.value().machines)
                it->second.desc.instances.push_back({m, offer.value().provider_id});
        }
    }
    plan.action = OffloadPlan::Action::scale;
    plan.scale_provider = offer.value().provider_id;
    plan.scale_machines = offer.value().machines;
    std::lock_guard lk(plans_mu_);
    plans_.push_back(plan);
    return plan;
}

std::vector<OffloadPlan> OffloadingApis::offload_plans() const {
    std::lock_guard lk(plans_mu_);
    return plans_;
}

Status OffloadingApis::publish(const protocol::Credentials& creds,
                               const std::string& dataset_id,
                               const std::vector<std::string>& audience) {
    auto info = security_->dataset(dataset_id);
    if (!info)
        return Status(Err::UnknownDataset, "dataset " + dataset_id + " not registered");
    if (info->owner != creds.principal_id &&
        !creds.has_role(protocol::Role::security_admin))
        return Status(Err::AccessDenied, "publish requires the dataset owner");
    if (audience.empty()) return Status::ok_status();
    return security_->grant(creds, dataset_id, security::AclAction::read, audience);
}

Result<TransformReport> OffloadingApis::apply_transform(
    const protocol::Credentials& creds, const std::string& dataset_id,
    const std::string& which) {
    auto info = security_->dataset(dataset_id);
    if (!info)
        return Error{Err::UnknownDataset, "dataset " + dataset_id + " not registered"};
    if (info->owner != creds.principal_id &&
        !creds.has_role(protocol::Role::security_admin))
        return Error{Err::AccessDenied, "transform requires owner or security_admin"};

    auto protocols = security_->protocol_query(info->data_class, creds);
    if (which == "anonymize") {
        if (!protocols.anonymize)
            return Error{Err::TransformFailure,
                         "class protocols forbid anonymization"};
    } else if (which == "encrypt") {
        if (!protocols.encrypt)
            return Error{Err::TransformFailure, "class protocols forbid encryption"};
    } else {
        return Error{Err::TransformFailure, "unknown transform " + which};
    }

    struct Staged {
        CollectionRef at;
        std::string key;
        Bytes value;
    };
    std::vector<Staged> staged;
    for (const auto& at : dataset_locations(dataset_id)) {
        auto snap = snapshot_collection(at.store_id, at.collection);
        if (!snap) {
            if (snap.error().code == Err::UnknownCollection) continue;
            return Error{Err::TransformFailure, snap.error().message};
        }
        for (const auto& e : snap.value()) {
            auto plain = security_->recover_payload(e.value);
            if (!plain)
                return Error{Err::TransformFailure,
                             "record " + e.key + ": " + plain.error().message};
            auto enforced = security_->enforce_payload(dataset_id, info->data_class,
                                                       protocols, plain.value());
            if (!enforced) return enforced.error();
            staged.push_back({at, e.key, std::move(enforced.value())});
        }
    }

    // All records transformed cleanly; rewrite in place.
    TransformReport report;
    for (const auto& s : staged) {
        wrappers::UniformQuery w;
        w.op = wrappers::QueryOp::write;
        w.key = s.key;
        w.payload = s.value;
        if (auto st = apply_at(s.at, w); !st.ok())
            return Error{Err::TransformFailure, st.error().message};
        report.records++;
    }
    return report;
}

void OffloadingApis::note_dataset_location(const std::string& dataset_id,
                                           const CollectionRef& at) {
    std::lock_guard lk(datasets_mu_);
    dataset_locations_[dataset_id].insert(at);
}

std::vector<CollectionRef> OffloadingApis::dataset_locations(
    const std::string& dataset_id) const {
    std::lock_guard lk(datasets_mu_);
    auto it = dataset_locations_.find(dataset_id);
    if (it == dataset_locations_.end()) return {};
    return std::vector<CollectionRef>(it->second.begin(), it->second.end());
}

}  // namespace budamaf::offloading
