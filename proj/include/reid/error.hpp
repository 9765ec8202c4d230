#pragma once

#include <stdexcept>
#include <string>

namespace reid {

/// Base class for every failure raised by the library. `name()` is the
/// stable error identifier printed by the CLI (e.g. "NoCycleFound").
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& what)
        : std::runtime_error(what), name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

#define REID_DEFINE_ERROR(Type)                                            \
    class Type : public Error {                                            \
    public:                                                                \
        explicit Type(const std::string& what) : Error(#Type, what) {}     \
    };

// core
REID_DEFINE_ERROR(NotFound)
REID_DEFINE_ERROR(MalformedSequence)
REID_DEFINE_ERROR(DecodeError)
REID_DEFINE_ERROR(InvalidArgument)
// cycle
REID_DEFINE_ERROR(SignalTooShort)
REID_DEFINE_ERROR(NoCycleFound)
REID_DEFINE_ERROR(InsufficientFrames)
// feature
REID_DEFINE_ERROR(FormatError)
REID_DEFINE_ERROR(DimMismatch)
REID_DEFINE_ERROR(EmptyPool)
// metric
REID_DEFINE_ERROR(InsufficientPairs)
REID_DEFINE_ERROR(SingularCovariance)
REID_DEFINE_ERROR(EmptySet)
REID_DEFINE_ERROR(ChecksumMismatch)
// eval
REID_DEFINE_ERROR(TooFewIdentities)
REID_DEFINE_ERROR(MissingGalleryEntry)

#undef REID_DEFINE_ERROR

}  // namespace reid
