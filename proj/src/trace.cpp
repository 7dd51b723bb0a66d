#include "avl/trace.hpp"

#include "avl/bytes.hpp"

#include <fmt/format.h>

#include <charconv>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace avl {

namespace {

constexpr char trace_magic[4] = {'A', 'V', 'T', 'R'};

bool value_fits(const mem_access& m) {
  if (m.size == 4) return true;
  return m.value < (1u << (8 * m.size));
}

void check_accesses(const std::vector<mem_access>& list, std::size_t index, const char* what) {
  if (list.size() > max_accesses_per_record)
    throw trace_error(trace_error::kind::malformed,
                      fmt::format("record {}: more than {} {}", index, max_accesses_per_record, what),
                      index);
  for (const auto& m : list) {
    if (m.size != 1 && m.size != 2 && m.size != 4)
      throw trace_error(trace_error::kind::malformed,
                        fmt::format("record {}: {} size {} not in {{1,2,4}}", index, what, m.size), index);
    if (!value_fits(m))
      throw trace_error(trace_error::kind::malformed,
                        fmt::format("record {}: {} value {:#x} wider than {} bytes", index, what,
                                    m.value, m.size),
                        index);
  }
}

void encode_accesses(byte_writer& w, const std::vector<mem_access>& list) {
  w.u8(static_cast<std::uint8_t>(list.size()));
  for (const auto& m : list) {
    w.u32(m.address);
    w.u8(m.size);
    w.u32(m.value);
  }
}

std::vector<mem_access> decode_accesses(byte_reader& r) {
  std::vector<mem_access> out(r.u8());
  for (auto& m : out) {
    m.address = r.u32();
    m.size = r.u8();
    m.value = r.u32();
  }
  return out;
}

std::uint32_t parse_hex(std::string_view s, std::size_t index, const char* what) {
  std::uint32_t v = 0;
  if (s.empty())
    throw trace_error(trace_error::kind::malformed, fmt::format("record {}: empty {}", index, what), index);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw trace_error(trace_error::kind::malformed,
                      fmt::format("record {}: bad hex {} '{}'", index, what, s), index);
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string format_accesses(const std::vector<mem_access>& list) {
  std::string out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (i) out += ',';
    out += fmt::format("{:08x},{},{:0{}x}", list[i].address, list[i].size, list[i].value,
                       2 * list[i].size);
  }
  return out;
}

std::vector<mem_access> parse_accesses(std::string_view field, std::size_t index) {
  std::vector<mem_access> out;
  if (field.empty()) return out;
  const auto parts = split(field, ',');
  if (parts.size() % 3 != 0)
    throw trace_error(trace_error::kind::malformed,
                      fmt::format("record {}: memory access list is not (addr,size,value) triples", index),
                      index);
  for (std::size_t i = 0; i < parts.size(); i += 3) {
    mem_access m;
    m.address = parse_hex(parts[i], index, "access address");
    const auto size = parse_hex(parts[i + 1], index, "access size");
    if (size > 0xff)
      throw trace_error(trace_error::kind::malformed, fmt::format("record {}: bad size", index), index);
    m.size = static_cast<std::uint8_t>(size);
    m.value = parse_hex(parts[i + 2], index, "access value");
    out.push_back(m);
  }
  return out;
}

std::string flag_string(const section& s) {
  return fmt::format("r{}{}", s.writable ? 'w' : '-', s.executable ? 'x' : '-');
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) out += fmt::format("{:02x}", b);
  return out;
}

} // namespace

void validate(const trace_file& file) {
  for (std::size_t i = 0; i < file.records.size(); ++i) {
    const auto& rec = file.records[i];
    check_accesses(rec.reads, i, "reads");
    check_accesses(rec.writes, i, "writes");
    if (rec.regs_before.pc != rec.address)
      throw trace_error(trace_error::kind::malformed,
                        fmt::format("record {}: pc {:#x} disagrees with address {:#x}", i,
                                    rec.regs_before.pc, rec.address),
                        i);
    if (file.section_dump.find_section(rec.address) == nullptr)
      throw trace_error(trace_error::kind::malformed,
                        fmt::format("record {}: code address {:#x} outside the section dump", i,
                                    rec.address),
                        i);
  }
}

std::vector<std::uint8_t> encode_trace(const trace_file& file) {
  byte_writer w;
  w.str(std::string_view(trace_magic, 4));
  w.u16(file.version);
  w.u16(file.isa);
  w.u32(static_cast<std::uint32_t>(file.metadata.size()));
  for (const auto& [k, v] : file.metadata) {
    w.u16(static_cast<std::uint16_t>(k.size()));
    w.str(k);
    w.u16(static_cast<std::uint16_t>(v.size()));
    w.str(v);
  }
  w.u64(file.records.size());
  byte_writer rec;
  for (const auto& r : file.records) {
    rec.buffer().clear();
    rec.u32(r.address);
    rec.bytes(r.raw.data(), r.raw.size());
    rec.u8(static_cast<std::uint8_t>(r.text.size()));
    rec.str(r.text);
    for (auto g : r.regs_before.gpr) rec.u32(g);
    rec.u32(r.regs_before.pc);
    rec.u8(r.regs_before.flags);
    encode_accesses(rec, r.reads);
    encode_accesses(rec, r.writes);
    w.u16(static_cast<std::uint16_t>(rec.size()));
    w.bytes(rec.buffer().data(), rec.size());
  }
  const auto image = serialize_image(file.section_dump);
  w.u32(static_cast<std::uint32_t>(image.size()));
  w.bytes(image.data(), image.size());
  return w.take();
}

trace_file decode_trace(const std::vector<std::uint8_t>& bytes) {
  trace_file file;
  std::size_t record_index = 0;
  bool in_records = false;
  try {
    byte_reader r(bytes);
    if (r.str(4) != std::string_view(trace_magic, 4))
      throw trace_error(trace_error::kind::malformed, "not a trace file (bad magic)");
    file.version = r.u16();
    if (file.version != trace_format_version)
      throw trace_error(trace_error::kind::version_mismatch,
                        fmt::format("unsupported trace version {} (expected {})", file.version,
                                    trace_format_version));
    file.isa = r.u16();
    if (file.isa != micro32_isa_id)
      throw trace_error(trace_error::kind::version_mismatch, fmt::format("unknown isa id {}", file.isa));
    const auto meta = r.u32();
    for (std::uint32_t i = 0; i < meta; ++i) {
      auto key = r.str(r.u16());
      file.metadata[key] = r.str(r.u16());
    }
    const auto count = r.u64();
    if (count > bytes.size())
      throw trace_error(trace_error::kind::malformed, "record count exceeds stream size");
    file.records.reserve(count);
    in_records = true;
    for (record_index = 0; record_index < count; ++record_index) {
      const auto len = r.u16();
      const auto start = r.offset();
      trace_record rec;
      rec.address = r.u32();
      r.copy(rec.raw.data(), rec.raw.size());
      rec.text = r.str(r.u8());
      for (auto& g : rec.regs_before.gpr) g = r.u32();
      rec.regs_before.pc = r.u32();
      rec.regs_before.flags = r.u8();
      rec.reads = decode_accesses(r);
      rec.writes = decode_accesses(r);
      if (r.offset() - start != len)
        throw trace_error(trace_error::kind::malformed,
                          fmt::format("record {}: length prefix {} disagrees with body {}", record_index,
                                      len, r.offset() - start),
                          record_index);
      check_accesses(rec.reads, record_index, "reads");
      check_accesses(rec.writes, record_index, "writes");
      file.records.push_back(std::move(rec));
    }
    in_records = false;
    const auto image_len = r.u32();
    if (image_len > r.remaining()) throw truncated_error(bytes.size(), "section dump");
    std::size_t offset = r.offset();
    file.section_dump = deserialize_image(bytes, offset);
    if (offset != r.offset() + image_len)
      throw trace_error(trace_error::kind::malformed, "section dump length mismatch");
    if (offset != bytes.size())
      throw trace_error(trace_error::kind::malformed, "trailing bytes after section dump");
  } catch (const truncated_error& e) {
    throw trace_error(trace_error::kind::truncated,
                      in_records ? fmt::format("record {}: {}", record_index, e.what()) : e.what(),
                      e.offset());
  } catch (const image_error& e) {
    throw trace_error(trace_error::kind::malformed, std::string("section dump: ") + e.what());
  }
  validate(file);
  return file;
}

std::size_t write_trace(const trace_file& file, std::ostream& out) {
  const auto bytes = encode_trace(file);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw trace_error(trace_error::kind::io, "trace sink write failed");
  return bytes.size();
}

trace_file read_trace(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_trace(bytes);
}

std::string format_record(const trace_record& r) {
  std::string out = fmt::format("{:08x};{};", r.address, r.text);
  for (auto b : r.raw) out += fmt::format("{:02x}", b);
  out += ';';
  for (auto g : r.regs_before.gpr) out += fmt::format("{:08x},", g);
  out += fmt::format("{:08x},{:08x};", r.regs_before.pc, r.regs_before.flags);
  out += format_accesses(r.reads);
  out += ';';
  out += format_accesses(r.writes);
  out += ';';
  return out;
}

trace_record parse_record(const std::string& line, std::size_t index) {
  const auto fields = split(line, ';');
  if (fields.size() != 7 || !fields[6].empty())
    throw trace_error(trace_error::kind::malformed,
                      fmt::format("record {}: expected 6 ';'-terminated fields", index), index);
  trace_record r;
  r.address = parse_hex(fields[0], index, "address");
  r.text = std::string(fields[1]);
  if (fields[2].size() != 2 * instruction_size)
    throw trace_error(trace_error::kind::malformed, fmt::format("record {}: raw bytes must be 16 hex digits", index),
                      index);
  for (std::size_t i = 0; i < instruction_size; ++i)
    r.raw[i] = static_cast<std::uint8_t>(parse_hex(fields[2].substr(2 * i, 2), index, "raw byte"));
  const auto regs = split(fields[3], ',');
  if (regs.size() != register_count + 2)
    throw trace_error(trace_error::kind::malformed,
                      fmt::format("record {}: register file needs {} values", index, register_count + 2),
                      index);
  for (unsigned i = 0; i < register_count; ++i) r.regs_before.gpr[i] = parse_hex(regs[i], index, "register");
  r.regs_before.pc = parse_hex(regs[register_count], index, "pc");
  const auto flags = parse_hex(regs[register_count + 1], index, "flags");
  if (flags > 7) throw trace_error(trace_error::kind::malformed, fmt::format("record {}: bad flags", index), index);
  r.regs_before.flags = static_cast<std::uint8_t>(flags);
  r.reads = parse_accesses(fields[4], index);
  r.writes = parse_accesses(fields[5], index);
  check_accesses(r.reads, index, "reads");
  check_accesses(r.writes, index, "writes");
  return r;
}

void write_trace_text(const trace_file& file, std::ostream& out) {
  out << fmt::format("# avtr-text {} isa={}\n", file.version, file.isa);
  for (const auto& [k, v] : file.metadata) out << "#meta " << k << ' ' << v << '\n';
  out << fmt::format("#entry {:08x}\n", file.section_dump.entry);
  for (const auto& s : file.section_dump.sections)
    out << fmt::format("#section {} {:08x} {} {}\n", s.name, s.base, flag_string(s), to_hex(s.bytes));
  for (const auto& r : file.records) out << format_record(r) << '\n';
  if (!out) throw trace_error(trace_error::kind::io, "trace sink write failed");
}

trace_file read_trace_text(std::istream& in) {
  trace_file file;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# avtr-text ", 0) != 0)
    throw trace_error(trace_error::kind::malformed, "missing '# avtr-text' header");
  {
    std::istringstream hs(line.substr(12));
    unsigned version = 0;
    std::string isa;
    hs >> version >> isa;
    if (version != trace_format_version)
      throw trace_error(trace_error::kind::version_mismatch, fmt::format("unsupported text trace version {}", version));
    if (isa != fmt::format("isa={}", micro32_isa_id))
      throw trace_error(trace_error::kind::version_mismatch, "unknown isa '" + isa + "'");
  }
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "#meta") {
        std::string key, value;
        ls >> key;
        std::getline(ls >> std::ws, value);
        file.metadata[key] = value;
      } else if (tag == "#entry") {
        std::string v;
        ls >> v;
        file.section_dump.entry = parse_hex(v, 0, "entry");
      } else if (tag == "#section") {
        section s;
        std::string base, flags, hex;
        ls >> s.name >> base >> flags >> hex;
        s.base = parse_hex(base, 0, "section base");
        if (flags.size() != 3)
          throw trace_error(trace_error::kind::malformed, "bad section flags '" + flags + "'");
        s.writable = flags[1] == 'w';
        s.executable = flags[2] == 'x';
        if (hex.size() % 2 != 0) throw trace_error(trace_error::kind::malformed, "odd section hex length");
        s.bytes.resize(hex.size() / 2);
        for (std::size_t i = 0; i < s.bytes.size(); ++i)
          s.bytes[i] = static_cast<std::uint8_t>(parse_hex(std::string_view(hex).substr(2 * i, 2), 0, "section byte"));
        file.section_dump.sections.push_back(std::move(s));
      }
      continue;
    }
    file.records.push_back(parse_record(line, index++));
  }
  try {
    validate(file.section_dump);
  } catch (const image_error& e) {
    throw trace_error(trace_error::kind::malformed, std::string("section dump: ") + e.what());
  }
  validate(file);
  return file;
}

} // namespace avl
