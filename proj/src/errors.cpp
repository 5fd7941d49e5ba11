#include "pmlkit/errors.hpp"

namespace pmlkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NotPsd: return "NotPsd";
    case ErrorKind::ZeroMatrix: return "ZeroMatrix";
    case ErrorKind::RankMismatch: return "RankMismatch";
    case ErrorKind::NecessaryConditionViolated: return "NecessaryConditionViolated";
    case ErrorKind::NoRoot: return "NoRoot";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NotSchurStable: return "NotSchurStable";
    case ErrorKind::Schema: return "SchemaError";
  }
  return "Error";
}

}  // namespace pmlkit
