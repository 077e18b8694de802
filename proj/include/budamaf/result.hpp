#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace budamaf {

// Error vocabulary shared by every component. These names travel over the
// wire and are rendered by the CLI, so they stay stable.
enum class Err {
    MalformedRequest,
    UnknownJobType,
    SchemaViolation,
    IllegalTransition,
    AuthenticationFailed,
    AccessDenied,
    UnknownDataset,
    InvalidPolicy,
    MethodNotAllowed,
    Overloaded,
    NotFound,
    ChannelClosed,
    IntegrityViolation,
    TransformFailure,
    Unreachable,
    DuplicateId,
    StoreNotFound,
    StoreNotReady,
    WrapperError,
    CapabilityMissing,
    CapacityExceeded,
    NoWrapperForKind,
    MigrationFailed,
    VerificationFailed,
    LinkExists,
    NoRemedy,
    BadSelector,
    TxnUnknown,
    DeadlineExceeded,
    UnknownCollection,
    NoFeasiblePlacement,
    ScenarioAssertionFailed,
    Cancelled,
    UsageError,
    TransportError,
    InternalError,
};

const char* err_name(Err code);

// Reverse lookup; returns InternalError for unknown names.
Err err_from_name(std::string_view name);

struct Error {
    Err code = Err::InternalError;
    std::string message;

    Error() = default;
    Error(Err c, std::string msg) : code(c), message(std::move(msg)) {}
};

template <typename T>
class [[nodiscard]] Result {
public:
    Result(T value) : v_(std::move(value)) {}
    Result(Error error) : v_(std::move(error)) {}
    Result(Err code, std::string message) : v_(Error{code, std::move(message)}) {}

    bool ok() const { return std::holds_alternative<T>(v_); }
    explicit operator bool() const { return ok(); }

    T& value() & { return std::get<T>(v_); }
    const T& value() const& { return std::get<T>(v_); }
    T&& value() && { return std::get<T>(std::move(v_)); }

    const Error& error() const { return std::get<Error>(v_); }
    Err code() const { return error().code; }

private:
    std::variant<T, Error> v_;
};

// Result with no payload.
class [[nodiscard]] Status {
public:
    Status() = default;
    Status(Error error) : err_(std::move(error)), failed_(true) {}
    Status(Err code, std::string message)
        : err_(code, std::move(message)), failed_(true) {}

    static Status ok_status() { return Status(); }

    bool ok() const { return !failed_; }
    explicit operator bool() const { return ok(); }
    const Error& error() const { return err_; }
    Err code() const { return err_.code; }

private:
    Error err_;
    bool failed_ = false;
};

}  // namespace budamaf
