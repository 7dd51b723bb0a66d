#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace avl {

struct section {
  std::string name;
  std::uint32_t base = 0;
  std::vector<std::uint8_t> bytes;
  bool writable = false;
  bool executable = false;

  std::uint32_t end() const { return base + static_cast<std::uint32_t>(bytes.size()); }
  bool contains(std::uint32_t addr) const { return addr >= base && addr - base < bytes.size(); }

  friend bool operator==(const section&, const section&) = default;
};

/// A loadable program: named sections at fixed bases plus an entry point.
/// Section ranges never overlap.
struct program_image {
  std::vector<section> sections;
  std::uint32_t entry = 0;

  const section* find_section(std::uint32_t addr) const;
  const section* find_section(const std::string& name) const;

  friend bool operator==(const program_image&, const program_image&) = default;
};

class image_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Throws image_error when two sections overlap or a section wraps the
/// address space.
void validate(const program_image& image);

/// Applies byte overrides to the image's sections. Throws image_error for an
/// address outside every section.
void apply_overrides(program_image& image, const std::map<std::uint32_t, std::uint8_t>& overrides);

// Binary container ("AVIM"): magic, u16 version, u32 entry, u16 section
// count, then per section u8 name length, name, u32 base, u32 length,
// u8 flags (bit0 writable, bit1 executable), bytes. Little endian.
inline constexpr std::uint16_t image_format_version = 1;

std::vector<std::uint8_t> serialize_image(const program_image& image);

/// Parses an image blob starting at `offset`; advances `offset` past it.
program_image deserialize_image(const std::vector<std::uint8_t>& blob, std::size_t& offset);

void write_image(const program_image& image, std::ostream& out);
program_image read_image(std::istream& in);

} // namespace avl
