#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "budamaf/capacity.hpp"
#include "budamaf/protocol.hpp"
#include "budamaf/result.hpp"
#include "budamaf/security.hpp"
#include "budamaf/wrapper.hpp"

namespace budamaf::offloading {

using json = nlohmann::json;

enum class StoreState { creating, ready, scaling, relocating, destroyed };

const char* store_state_name(StoreState s);

struct MachineRef {
    std::string machine_id;
    std::string provider_id;
};

struct DataStoreDescriptor {
    std::string store_id;
    wrappers::StoreKind kind = wrappers::StoreKind::key_value;
    std::string provider_id;
    std::string access_point;
    std::vector<MachineRef> instances;
    StoreState state = StoreState::creating;
    bool acid = false;
    std::string owner;
};

json store_descriptor_to_json(const DataStoreDescriptor& d);

struct WrapperRegistration {
    std::string wrapper_id;
    wrappers::StoreKind kind = wrappers::StoreKind::key_value;
    std::string endpoint;
    wrappers::CapabilitySet capabilities;
};

struct ReplicationLink {
    enum class Mode { one_shot, continuous };

    std::string link_id;
    std::string src_store;
    std::string src_collection;
    std::string dst_store;
    std::string dst_collection;
    Mode mode = Mode::one_shot;
    std::uint64_t last_seq = 0;
};

json replication_link_to_json(const ReplicationLink& l);

struct OffloadPlan {
    enum class Action { redirect, scale };

    std::string store_id;
    std::uint64_t trigger_queue_depth = 0;
    Action action = Action::redirect;
    // redirect
    std::string redirect_store;
    // scale
    std::string scale_provider;
    std::vector<std::string> scale_machines;
    std::uint64_t created_at = 0;
};

json offload_plan_to_json(const OffloadPlan& p);

struct MigrationReport {
    std::uint64_t records_moved = 0;
    std::uint64_t bytes_moved = 0;
    std::uint64_t duration_ms = 0;
    std::uint64_t epochs_reapplied = 0;
};

json migration_report_to_json(const MigrationReport& r);

struct TransformReport {
    std::uint64_t records = 0;
};

// Normalized wrapper result handed back to the Core; exactly one of
// payload/rows/count/error present.
struct QueryResult {
    bool ok = false;
    std::optional<Bytes> payload;
    std::optional<std::vector<json>> rows;
    std::optional<std::uint64_t> count;
    std::optional<Error> error;

    static QueryResult from_response(const wrappers::WrapperResponse& r);
    static QueryResult failure(Error e);
};

json query_result_to_json(const QueryResult& r);

struct CollectionRef {
    std::string store_id;
    std::string collection;

    bool operator<(const CollectionRef& o) const {
        return std::tie(store_id, collection) < std::tie(o.store_id, o.collection);
    }
    bool operator==(const CollectionRef& o) const = default;
};

// Test hook: mutate the n-th copied record during migration phase 1.
struct MigrationFault {
    std::int64_t corrupt_record_index = -1;
};

// Dispatches uniform queries to responsible wrappers, manages the store
// catalog and lifecycle, and executes the federation data operations.
class OffloadingApis {
public:
    struct Options {
        std::uint64_t q_high = 64;           // offload trigger queue depth
        std::uint32_t scale_step = 1;        // machines added per offload scale plan
        std::uint64_t write_queue_bound = 1024;
        std::string user_region;             // region scale offers optimize for
        bool require_enforced_writes = false;  // wrapper-boundary envelope check
        std::function<void(const std::string&)> scale_hook;  // runs while scaling
    };

    OffloadingApis(security::SecurityEngine* security, CapacityPool* capacity);
    OffloadingApis(security::SecurityEngine* security, CapacityPool* capacity,
                   Options opts);

    // --- wrapper registry -------------------------------------------------
    Result<std::string> register_wrapper(const WrapperRegistration& reg,
                                         std::shared_ptr<wrappers::WrapperClient> client);
    std::vector<WrapperRegistration> wrapper_registrations() const;
    std::map<std::string, std::uint64_t> wrapper_dispatch_counts() const;

    // --- store catalog & lifecycle -----------------------------------------
    Result<DataStoreDescriptor> create_store(wrappers::StoreKind kind,
                                             const std::string& provider_id,
                                             const std::vector<std::string>& machines,
                                             const std::string& owner,
                                             const std::string& preferred_id = "");
    Status destroy_store(const std::string& store_id);
    Result<DataStoreDescriptor> scale_store(const std::string& store_id,
                                            const std::vector<std::string>& machines,
                                            const std::string& provider_id = "");
    Status release_instances(const std::string& store_id, std::uint32_t machines);
    Result<DataStoreDescriptor> relocate_store(const std::string& store_id,
                                               const std::string& new_provider);
    std::optional<DataStoreDescriptor> store(const std::string& store_id) const;
    std::vector<DataStoreDescriptor> stores() const;

    // --- data plane ---------------------------------------------------------
    QueryResult dispatch(const wrappers::UniformQuery& q);
    // Async enqueue straight into the serving wrapper's queue; reads only
    // (the load-generation path of the simulator).
    std::future<wrappers::WrapperResponse> dispatch_async(wrappers::UniformQuery q);
    QueryResult txn_control(const std::string& store_id, const wrappers::TxnControl& c);
    Result<std::vector<wrappers::SnapshotEntry>> snapshot_collection(
        const std::string& store_id, const std::string& collection);
    std::uint64_t store_queue_depth(const std::string& store_id) const;

    // --- federation data operations -----------------------------------------
    Result<MigrationReport> migrate(const CollectionRef& src, const CollectionRef& dst,
                                    const MigrationFault& fault = {});
    Result<ReplicationLink> replicate(const CollectionRef& src, const CollectionRef& dst,
                                      ReplicationLink::Mode mode);
    Status remove_link(const std::string& link_id);
    Result<std::uint64_t> run_sync_cycle(const std::string& link_id);
    std::uint64_t run_all_sync_cycles();
    std::vector<ReplicationLink> links() const;

    Result<OffloadPlan> offload(const std::string& store_id);
    std::vector<OffloadPlan> offload_plans() const;

    Status publish(const protocol::Credentials& creds, const std::string& dataset_id,
                   const std::vector<std::string>& audience);
    Result<TransformReport> apply_transform(const protocol::Credentials& creds,
                                            const std::string& dataset_id,
                                            const std::string& which);

    // Dataset locations feed apply_transform; the Core notes them as writes
    // carrying dataset metadata pass through.
    void note_dataset_location(const std::string& dataset_id, const CollectionRef& at);
    std::vector<CollectionRef> dataset_locations(const std::string& dataset_id) const;

private:
    struct WrapperHandle {
        WrapperRegistration registration;
        std::shared_ptr<wrappers::WrapperClient> client;
        std::uint64_t dispatches = 0;
    };

    struct StoreRuntime {
        DataStoreDescriptor desc;
        std::vector<wrappers::UniformQuery> scaling_writes;
    };

    struct Fence {
        bool active = false;
        std::uint64_t epoch = 0;
        std::vector<wrappers::UniformQuery> pending;
    };

    struct WriteLog {
        std::uint64_t next_seq = 1;
        std::vector<std::pair<std::uint64_t, wrappers::UniformQuery>> entries;
    };

    struct CopyStats {
        std::uint64_t records = 0;
        std::uint64_t bytes = 0;
    };

    Result<std::shared_ptr<wrappers::WrapperClient>> wrapper_for_kind(
        wrappers::StoreKind kind, std::string* wrapper_id = nullptr);
    Result<StoreRuntime> store_runtime(const std::string& store_id) const;
    CollectionRef resolve_alias(CollectionRef ref) const;
    QueryResult forward(const wrappers::UniformQuery& q, bool direct);
    Status apply_at(const CollectionRef& at, const wrappers::UniformQuery& templ);
    Result<CopyStats> copy_collection_verified(const CollectionRef& src,
                                               const CollectionRef& dst,
                                               const MigrationFault& fault);
    void log_write(const CollectionRef& at, const wrappers::UniformQuery& q);
    std::string next_id(const char* prefix);

    security::SecurityEngine* security_;
    CapacityPool* capacity_;
    Options opts_;

    mutable std::mutex wrappers_mu_;
    std::map<std::string, WrapperHandle> wrappers_;
    std::map<wrappers::StoreKind, std::vector<std::string>> by_kind_;
    std::map<wrappers::StoreKind, std::uint64_t> rr_cursor_;

    mutable std::mutex catalog_mu_;
    std::map<std::string, StoreRuntime> stores_;

    mutable std::mutex fences_mu_;
    std::map<CollectionRef, Fence> fences_;
    std::map<CollectionRef, CollectionRef> aliases_;
    std::map<CollectionRef, CollectionRef> read_redirects_;
    std::map<CollectionRef, WriteLog> write_logs_;

    mutable std::mutex links_mu_;
    std::map<std::string, ReplicationLink> links_;

    mutable std::mutex plans_mu_;
    std::vector<OffloadPlan> plans_;

    mutable std::mutex datasets_mu_;
    std::map<std::string, std::set<CollectionRef>> dataset_locations_;

    std::atomic<std::uint64_t> id_seq_{0};
    std::atomic<std::uint64_t> clock_{0};
};

}  // namespace budamaf::offloading
