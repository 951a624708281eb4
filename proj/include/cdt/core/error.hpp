#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdt {

enum class ErrorKind {
  io,
  malformed_document,
  invariant_violation,
  unparseable_version,
  depth_exceeded,
  malformed_entry,
  duplicate,
  bad_magic,
  unsupported_format_version,
  unknown_arch,
  truncated,
  section_out_of_bounds,
  overlapping_sections,
  bad_code_sections,
  unknown_opcode,
  bad_register,
  bad_code_length,
  bad_call_target,
  bad_branch_target,
  iteration_cap,
  schema_mismatch,
  stale_cdt,
  config,
  assembler,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::malformed_document: return "malformed-document";
    case ErrorKind::invariant_violation: return "invariant-violation";
    case ErrorKind::unparseable_version: return "unparseable-version";
    case ErrorKind::depth_exceeded: return "depth-exceeded";
    case ErrorKind::malformed_entry: return "malformed-entry";
    case ErrorKind::duplicate: return "duplicate";
    case ErrorKind::bad_magic: return "bad-magic";
    case ErrorKind::unsupported_format_version: return "unsupported-format-version";
    case ErrorKind::unknown_arch: return "unknown-arch";
    case ErrorKind::truncated: return "truncated-file";
    case ErrorKind::section_out_of_bounds: return "section-out-of-bounds";
    case ErrorKind::overlapping_sections: return "overlapping-sections";
    case ErrorKind::bad_code_sections: return "bad-code-sections";
    case ErrorKind::unknown_opcode: return "unknown-opcode";
    case ErrorKind::bad_register: return "bad-register";
    case ErrorKind::bad_code_length: return "bad-code-length";
    case ErrorKind::bad_call_target: return "bad-call-target";
    case ErrorKind::bad_branch_target: return "bad-branch-target";
    case ErrorKind::iteration_cap: return "iteration-cap";
    case ErrorKind::schema_mismatch: return "schema-mismatch";
    case ErrorKind::stale_cdt: return "stale-cdt";
    case ErrorKind::config: return "config";
    case ErrorKind::assembler: return "assembler";
  }
  return "unknown";
}

/// Every failure raised by the toolkit. `where()` names the offending
/// location: a document field path, a file path, a record id or an
/// instruction ordinal, depending on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string where, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + (where.empty() ? "" : " at " + where) +
                           ": " + message),
        kind_(kind),
        where_(std::move(where)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& where() const noexcept { return where_; }

 private:
  ErrorKind kind_;
  std::string where_;
};

}  // namespace cdt
