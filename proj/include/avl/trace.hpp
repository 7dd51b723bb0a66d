#pragma once

#include "avl/image.hpp"
#include "avl/isa.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace avl {

/// Register file as captured before an instruction executes.
struct register_file {
  std::array<std::uint32_t, register_count> gpr{};
  std::uint32_t pc = 0;
  std::uint8_t flags = 0;

  friend bool operator==(const register_file&, const register_file&) = default;
};

struct mem_access {
  std::uint32_t address = 0;
  std::uint8_t size = 0; // 1, 2 or 4
  std::uint32_t value = 0;

  friend bool operator==(const mem_access&, const mem_access&) = default;
};

/// Upper bound on memory accesses per record in either direction.
inline constexpr std::size_t max_accesses_per_record = 8;

/// One executed instruction.
struct trace_record {
  std::uint32_t address = 0;
  std::string text;
  encoded_instruction raw{};
  register_file regs_before;
  std::vector<mem_access> reads;
  std::vector<mem_access> writes;

  friend bool operator==(const trace_record&, const trace_record&) = default;
};

inline constexpr std::uint16_t trace_format_version = 1;
inline constexpr std::uint16_t micro32_isa_id = 1;

struct trace_file {
  std::uint16_t version = trace_format_version;
  std::uint16_t isa = micro32_isa_id;
  std::vector<trace_record> records;
  program_image section_dump;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const trace_file&, const trace_file&) = default;
};

class trace_error : public std::runtime_error {
public:
  enum class kind { version_mismatch, truncated, malformed, io };

  trace_error(kind k, const std::string& what, std::size_t where = 0)
      : std::runtime_error(what), kind_(k), where_(where) {}

  kind error_kind() const { return kind_; }
  /// Byte offset for truncation, record index for malformed records.
  std::size_t where() const { return where_; }

private:
  kind kind_;
  std::size_t where_;
};

/// Checks the record-level invariants (access sizes, value widths, access
/// bounds, code addresses covered by the section dump). Throws
/// trace_error(malformed) naming the first offending record.
void validate(const trace_file& file);

// Binary codec: "AVTR", u16 version, u16 isa, metadata, u64 record count,
// length-prefixed records, u32-length-prefixed section dump. See
// docs/formats.md for the byte layout.
std::vector<std::uint8_t> encode_trace(const trace_file& file);
trace_file decode_trace(const std::vector<std::uint8_t>& bytes);

/// Returns the number of bytes written.
std::size_t write_trace(const trace_file& file, std::ostream& out);
trace_file read_trace(std::istream& in);

// Text codec, one record per line:
//   <address>;<instr>;<raw bytes>;<r0>,...,<r15>,<pc>,<flags>;<read addr>,<size>,<val>,...;<write addr>,<size>,<val>,...;
// Lowercase hex throughout; header lines start with '#'.
std::string format_record(const trace_record& record);
trace_record parse_record(const std::string& line, std::size_t index);

void write_trace_text(const trace_file& file, std::ostream& out);
trace_file read_trace_text(std::istream& in);

} // namespace avl
