#include "avl/image.hpp"

#include "avl/bytes.hpp"

#include <algorithm>
#include <istream>
#include <iterator>
#include <ostream>

namespace avl {

const section* program_image::find_section(std::uint32_t addr) const {
  for (const auto& s : sections)
    if (s.contains(addr)) return &s;
  return nullptr;
}

const section* program_image::find_section(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

void validate(const program_image& image) {
  for (std::size_t i = 0; i < image.sections.size(); ++i) {
    const auto& a = image.sections[i];
    if (static_cast<std::uint64_t>(a.base) + a.bytes.size() > 0x1'0000'0000ull)
      throw image_error("section '" + a.name + "' wraps the address space");
    for (std::size_t j = i + 1; j < image.sections.size(); ++j) {
      const auto& b = image.sections[j];
      if (a.bytes.empty() || b.bytes.empty()) continue;
      if (a.base < b.end() && b.base < a.end())
        throw image_error("sections '" + a.name + "' and '" + b.name + "' overlap");
    }
  }
}

void apply_overrides(program_image& image, const std::map<std::uint32_t, std::uint8_t>& overrides) {
  for (const auto& [addr, value] : overrides) {
    auto it = std::find_if(image.sections.begin(), image.sections.end(),
                           [addr = addr](const section& s) { return s.contains(addr); });
    if (it == image.sections.end())
      throw image_error("override address outside every section: " + std::to_string(addr));
    it->bytes[addr - it->base] = value;
  }
}

namespace {
constexpr char image_magic[4] = {'A', 'V', 'I', 'M'};
}

std::vector<std::uint8_t> serialize_image(const program_image& image) {
  byte_writer w;
  w.str(std::string_view(image_magic, 4));
  w.u16(image_format_version);
  w.u32(image.entry);
  w.u16(static_cast<std::uint16_t>(image.sections.size()));
  for (const auto& s : image.sections) {
    w.u8(static_cast<std::uint8_t>(s.name.size()));
    w.str(s.name);
    w.u32(s.base);
    w.u32(static_cast<std::uint32_t>(s.bytes.size()));
    w.u8(static_cast<std::uint8_t>((s.writable ? 1 : 0) | (s.executable ? 2 : 0)));
    w.bytes(s.bytes.data(), s.bytes.size());
  }
  return w.take();
}

program_image deserialize_image(const std::vector<std::uint8_t>& blob, std::size_t& offset) {
  byte_reader r(blob, offset);
  if (r.str(4) != std::string_view(image_magic, 4)) throw image_error("bad image magic");
  if (auto v = r.u16(); v != image_format_version)
    throw image_error("unsupported image version " + std::to_string(v));
  program_image image;
  image.entry = r.u32();
  const auto count = r.u16();
  for (unsigned i = 0; i < count; ++i) {
    section s;
    s.name = r.str(r.u8());
    s.base = r.u32();
    const auto len = r.u32();
    const auto flags = r.u8();
    if ((flags & ~3u) != 0) throw image_error("reserved section flag bits set in '" + s.name + "'");
    s.writable = (flags & 1) != 0;
    s.executable = (flags & 2) != 0;
    if (len > r.remaining()) throw truncated_error(blob.size(), "section '" + s.name + "' body");
    s.bytes.resize(len);
    r.copy(s.bytes.data(), len);
    image.sections.push_back(std::move(s));
  }
  validate(image);
  offset = r.offset();
  return image;
}

void write_image(const program_image& image, std::ostream& out) {
  const auto blob = serialize_image(image);
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
}

program_image read_image(std::istream& in) {
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t offset = 0;
  return deserialize_image(blob, offset);
}

} // namespace avl
