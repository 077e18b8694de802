#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "budamaf/analytics.hpp"
#include "budamaf/core.hpp"
#include "budamaf/offloading.hpp"
#include "budamaf/security.hpp"

namespace budamaf::handlers {

using json = nlohmann::json;

// Component-side executor for every job the routing table sends to
// off_loading_apis. Initiator credentials arrive pre-authenticated; the job
// id is already injected into job_details by the Core.
class OffloadingHandler : public core::ComponentHandler {
public:
    explicit OffloadingHandler(offloading::OffloadingApis* apis);

    Result<json> handle_job(const protocol::JobRecord& job) override;
    void cancel_job(const std::string& job_id) override;

private:
    Result<json> handle_data_op(const protocol::JobRecord& job);
    Status require_store_owner(const protocol::JobRecord& job,
                               const std::string& store_id);

    offloading::OffloadingApis* apis_;
    std::mutex mu_;
    std::map<std::string, std::string> job_links_;  // job_id -> link_id
};

class SecurityHandler : public core::ComponentHandler {
public:
    explicit SecurityHandler(security::SecurityEngine* engine);
    Result<json> handle_job(const protocol::JobRecord& job) override;

private:
    security::SecurityEngine* engine_;
};

class AnalyticsHandler : public core::ComponentHandler {
public:
    explicit AnalyticsHandler(analytics::AnalyticsEngine* engine);
    Result<json> handle_job(const protocol::JobRecord& job) override;

private:
    analytics::AnalyticsEngine* engine_;
};

}  // namespace budamaf::handlers
