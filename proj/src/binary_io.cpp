#include "binary_io.hpp"

#include <limits>

namespace xsense {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::InsufficientAnchors: return "InsufficientAnchors";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::InvalidHyperparameter: return "InvalidHyperparameter";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnknownSense: return "UnknownSense";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::DegenerateTable: return "DegenerateTable";
    case ErrorCode::InsufficientSample: return "InsufficientSample";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::ConfigContradiction: return "ConfigContradiction";
    case ErrorCode::MalformedConfig: return "MalformedConfig";
  }
  return "Unknown";
}

namespace detail {

void BinaryWriter::put_string(const std::string& s) {
  if (s.size() > std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::IoFailure, "string too long for u32 length prefix");
  put(static_cast<std::uint32_t>(s.size()));
  put_bytes(s.data(), s.size());
}

void BinaryReader::read_exact(char* data, std::size_t n) {
  in_.read(data, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw Error(ErrorCode::TruncatedFile, source_ + ": unexpected end of file");
}

void BinaryReader::expect_magic(const char (&magic)[5]) {
  char buf[4];
  in_.read(buf, 4);
  if (in_.gcount() != 4 || std::memcmp(buf, magic, 4) != 0)
    throw Error(ErrorCode::MalformedHeader, source_ + ": bad magic, expected " + std::string(magic, 4));
}

std::string BinaryReader::get_string() {
  const auto len = get<std::uint32_t>();
  std::string s(len, '\0');
  if (len > 0) read_exact(s.data(), len);
  return s;
}

bool BinaryReader::at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

}  // namespace detail
}  // namespace xsense
