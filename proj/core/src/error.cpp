#include "velofilt/error.hpp"

namespace velofilt {

const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::InvalidState: return "invalid-state";
        case ErrorKind::NumericFailure: return "numeric-failure";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace velofilt
