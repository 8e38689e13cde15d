#pragma once

#include <stdexcept>
#include <string>

namespace ckfdist {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Two tracked points coincide (or nearly so); no direction can be formed.
struct DegenerateSegment : Error {
    using Error::Error;
};

// Innovation covariance S = H P H^T + R is not invertible.
struct SingularInnovation : Error {
    using Error::Error;
};

// The constraint normal system D D^T is singular and no projection exists.
struct ConstraintSingular : Error {
    using Error::Error;
};

// Paired series of different lengths passed to a metric.
struct LengthMismatch : Error {
    using Error::Error;
};

// A series has (numerically) zero variance, so correlation is undefined.
struct DegenerateSeries : Error {
    using Error::Error;
};

// Reference path has zero total length, so relative deviation is undefined.
struct ZeroTruthPath : Error {
    using Error::Error;
};

// Motion preset parameters produce an unreachable or out-of-range pose.
struct InvalidPreset : Error {
    using Error::Error;
};

// File carries a known magic but an unsupported format version.
struct VersionMismatch : Error {
    using Error::Error;
};

// File is structurally broken: bad magic, missing section, wrong field count.
struct SchemaError : Error {
    using Error::Error;
};

}  // namespace ckfdist
