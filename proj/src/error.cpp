#include "cbr/error.hpp"

namespace cbr {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::NotFound: return "not_found";
        case ErrorKind::IllegalState: return "illegal_state";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace cbr
