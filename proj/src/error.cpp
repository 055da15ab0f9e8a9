#include "protolex/error.hpp"

namespace protolex {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::empty_text: return "EmptyText";
    case Errc::cache_miss: return "CacheMiss";
    case Errc::io: return "IoError";
    case Errc::format: return "FormatError";
    case Errc::network: return "NetworkError";
    case Errc::protocol: return "ProtocolError";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::zero_vector: return "ZeroVector";
    case Errc::degenerate_weights: return "DegenerateWeights";
    case Errc::missing_class_samples: return "MissingClassSamples";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::missing_source_text: return "MissingSourceText";
    case Errc::schema: return "SchemaError";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

}  // namespace protolex
