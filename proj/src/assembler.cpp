#include "avl/assembler.hpp"

#include "avl/isa.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace avl {

assemble_error::assemble_error(kind k, std::size_t line, std::size_t column, const std::string& msg)
    : std::runtime_error(fmt::format("line {}:{}: {}", line, column, msg)),
      kind_(k), line_(line), column_(column) {}

namespace {

using ek = assemble_error::kind;

enum class tok { ident, number, string, punct };

struct token {
  tok type;
  std::string text;
  std::int64_t value = 0;
  std::size_t col = 0; // 1-based
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$'; }
bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

std::vector<token> lex(std::string_view s, std::size_t line) {
  std::vector<token> out;
  std::size_t i = 0;
  auto fail = [&](std::size_t at, const std::string& msg) -> void {
    throw assemble_error(ek::syntax, line, at + 1, msg);
  };
  while (i < s.size()) {
    const char c = s[i];
    if (c == ';') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (ident_start(c)) {
      while (i < s.size() && ident_char(s[i])) ++i;
      out.push_back({tok::ident, std::string(s.substr(start, i - start)), 0, start + 1});
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      int base = 10;
      if (c == '0' && i + 1 < s.size() && (s[i + 1] == 'x' || s[i + 1] == 'X')) {
        base = 16;
        i += 2;
      } else if (c == '0' && i + 1 < s.size() && (s[i + 1] == 'b' || s[i + 1] == 'B')) {
        base = 2;
        i += 2;
      }
      const std::size_t digits = i;
      std::uint64_t v = 0;
      while (i < s.size() && std::isalnum(static_cast<unsigned char>(s[i]))) {
        const char d = static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
        int dv = std::isdigit(static_cast<unsigned char>(d)) ? d - '0' : (d >= 'a' && d <= 'f' ? d - 'a' + 10 : 99);
        if (dv >= base) fail(i, fmt::format("bad digit '{}' in number", s[i]));
        v = v * static_cast<unsigned>(base) + static_cast<unsigned>(dv);
        if (v > 0xffffffffffull) throw assemble_error(ek::out_of_range, line, start + 1, "number too large");
        ++i;
      }
      if (i == digits) fail(start, "number has no digits");
      out.push_back({tok::number, std::string(s.substr(start, i - start)), static_cast<std::int64_t>(v), start + 1});
    } else if (c == '\'') {
      if (i + 2 >= s.size() || s[i + 2] != '\'') fail(start, "bad character literal");
      out.push_back({tok::number, std::string(s.substr(start, 3)), static_cast<unsigned char>(s[i + 1]), start + 1});
      i += 3;
    } else if (c == '"') {
      std::string text;
      ++i;
      while (i < s.size() && s[i] != '"') {
        if (s[i] == '\\' && i + 1 < s.size()) {
          const char e = s[i + 1];
          text.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e == '0' ? '\0' : e);
          i += 2;
        } else {
          text.push_back(s[i++]);
        }
      }
      if (i >= s.size()) fail(start, "unterminated string");
      ++i;
      out.push_back({tok::string, text, 0, start + 1});
    } else if (std::string_view(",[]+-:").find(c) != std::string_view::npos) {
      out.push_back({tok::punct, std::string(1, c), 0, start + 1});
      ++i;
    } else {
      fail(start, fmt::format("unexpected character '{}'", c));
    }
  }
  return out;
}

struct section_builder {
  std::string name;
  std::uint32_t base = 0;
  bool writable = false;
  bool executable = false;
  std::vector<std::uint8_t> bytes;

  std::uint32_t here() const { return base + static_cast<std::uint32_t>(bytes.size()); }
};

class assembler {
public:
  explicit assembler(std::string_view source) {
    std::size_t pos = 0;
    while (pos <= source.size()) {
      auto nl = source.find('\n', pos);
      if (nl == std::string_view::npos) nl = source.size();
      lines_.push_back(source.substr(pos, nl - pos));
      pos = nl + 1;
    }
  }

  program_image run() {
    for (pass_ = 1; pass_ <= 2; ++pass_) {
      sections_.clear();
      current_ = 0;
      entry_.reset();
      select_section("text", default_text_base, false, true);
      for (std::size_t i = 0; i < lines_.size(); ++i) {
        line_ = i + 1;
        toks_ = lex(lines_[i], line_);
        pos_ = 0;
        statement();
      }
    }

    program_image image;
    for (auto& s : sections_) {
      if (s.bytes.empty()) continue;
      image.sections.push_back({s.name, s.base, std::move(s.bytes), s.writable, s.executable});
    }
    std::sort(image.sections.begin(), image.sections.end(),
              [](const section& a, const section& b) { return a.base < b.base; });
    if (entry_) {
      image.entry = *entry_;
    } else if (auto it = symbols_.find("_start"); it != symbols_.end()) {
      image.entry = static_cast<std::uint32_t>(it->second);
    } else if (const auto* text = image.find_section("text")) {
      image.entry = text->base;
    } else {
      auto exec = std::find_if(image.sections.begin(), image.sections.end(),
                               [](const section& s) { return s.executable; });
      image.entry = exec != image.sections.end() ? exec->base : 0;
    }
    validate(image);
    return image;
  }

  const std::map<std::string, std::int64_t>& symbols() const { return symbols_; }

private:
  [[noreturn]] void error(ek k, std::size_t col, const std::string& msg) const {
    throw assemble_error(k, line_, col, msg);
  }

  std::size_t col() const { return pos_ < toks_.size() ? toks_[pos_].col : lines_[line_ - 1].size() + 1; }
  bool at_end() const { return pos_ >= toks_.size(); }

  bool peek_punct(char c) const {
    return !at_end() && toks_[pos_].type == tok::punct && toks_[pos_].text[0] == c;
  }
  void expect_punct(char c) {
    if (!peek_punct(c)) error(ek::syntax, col(), fmt::format("expected '{}'", c));
    ++pos_;
  }
  void expect_end() {
    if (!at_end()) error(ek::syntax, col(), fmt::format("unexpected '{}'", toks_[pos_].text));
  }

  std::optional<unsigned> register_name(const std::string& t) const {
    if (t == "sp") return stack_register;
    if (t.size() < 2 || t[0] != 'r') return std::nullopt;
    unsigned v = 0;
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(t[i]))) return std::nullopt;
      v = v * 10 + static_cast<unsigned>(t[i] - '0');
      if (v > 99) break;
    }
    if (v >= register_count) error(ek::out_of_range, col(), fmt::format("no register '{}'", t));
    return v;
  }

  bool peek_register() const {
    if (at_end() || toks_[pos_].type != tok::ident) return false;
    const auto& t = toks_[pos_].text;
    if (t == "sp") return true;
    return t.size() >= 2 && t[0] == 'r' &&
           std::all_of(t.begin() + 1, t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  }

  unsigned reg() {
    if (!peek_register()) error(ek::syntax, col(), "expected register");
    auto r = register_name(toks_[pos_].text);
    ++pos_;
    return *r;
  }

  // Unresolved symbols evaluate to zero in pass 1 unless `need` is set.
  std::int64_t term(bool need) {
    if (at_end()) error(ek::syntax, col(), "expected expression");
    const auto& t = toks_[pos_];
    if (t.type == tok::punct && t.text == "-") {
      ++pos_;
      return -term(need);
    }
    if (t.type == tok::number) {
      ++pos_;
      return t.value;
    }
    if (t.type == tok::ident && !peek_register()) {
      ++pos_;
      auto it = symbols_.find(t.text);
      if (it != symbols_.end()) return it->second;
      if (pass_ == 2 || need) error(ek::undefined_label, t.col, fmt::format("undefined label '{}'", t.text));
      return 0;
    }
    error(ek::syntax, t.col, fmt::format("unexpected '{}' in expression", t.text));
  }

  std::int64_t expr(bool need = false) {
    std::int64_t v = term(need);
    while (peek_punct('+') || peek_punct('-')) {
      const bool minus = toks_[pos_].text == "-";
      ++pos_;
      const std::int64_t rhs = term(need);
      v = minus ? v - rhs : v + rhs;
    }
    return v;
  }

  std::uint32_t word_value(std::int64_t v, std::size_t at) const {
    if (v < std::numeric_limits<std::int32_t>::min() || v > std::numeric_limits<std::uint32_t>::max())
      error(ek::out_of_range, at, fmt::format("value {} does not fit in 32 bits", v));
    return static_cast<std::uint32_t>(v);
  }

  std::uint32_t imm32(bool need = false) {
    const std::size_t at = col();
    return word_value(expr(need), at);
  }

  // [rN], [rN+expr], [rN-expr]
  std::pair<unsigned, std::uint32_t> mem_operand() {
    expect_punct('[');
    const unsigned base = reg();
    std::uint32_t disp = 0;
    if (peek_punct('+') || peek_punct('-')) {
      const bool minus = toks_[pos_].text == "-";
      ++pos_;
      const std::size_t at = col();
      std::int64_t v = expr();
      if (minus) v = -v;
      disp = word_value(v, at);
    }
    expect_punct(']');
    return {base, disp};
  }

  section_builder& cur() { return sections_[current_]; }

  void select_section(const std::string& name, std::optional<std::uint32_t> base, bool writable,
                      bool executable) {
    for (std::size_t i = 0; i < sections_.size(); ++i) {
      if (sections_[i].name == name) {
        current_ = i;
        return;
      }
    }
    if (!base) error(ek::syntax, col(), fmt::format("section '{}' needs a base address", name));
    sections_.push_back({name, *base, writable, executable, {}});
    current_ = sections_.size() - 1;
  }

  void emit(std::uint32_t v, unsigned width) {
    for (unsigned i = 0; i < width; ++i) cur().bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void define(const std::string& name, std::int64_t value, std::size_t at) {
    if (peek_register_name(name)) error(ek::syntax, at, fmt::format("'{}' is a register name", name));
    if (pass_ == 1) {
      if (symbols_.count(name)) error(ek::duplicate_label, at, fmt::format("duplicate label '{}'", name));
    }
    symbols_[name] = value;
  }

  static bool peek_register_name(const std::string& t) {
    if (t == "sp") return true;
    return t.size() >= 2 && t[0] == 'r' &&
           std::all_of(t.begin() + 1, t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  }

  void statement() {
    // Labels
    while (toks_.size() >= pos_ + 2 && toks_[pos_].type == tok::ident && toks_[pos_ + 1].type == tok::punct &&
           toks_[pos_ + 1].text == ":") {
      define(toks_[pos_].text, cur().here(), toks_[pos_].col);
      pos_ += 2;
    }
    if (at_end()) return;
    const auto& head = toks_[pos_];
    if (head.type != tok::ident) error(ek::syntax, head.col, fmt::format("unexpected '{}'", head.text));
    ++pos_;
    if (head.text[0] == '.')
      directive(head);
    else
      instruction_line(head);
    expect_end();
  }

  std::vector<std::int64_t> expr_list(bool need = false) {
    std::vector<std::int64_t> out;
    out.push_back(expr(need));
    while (peek_punct(',')) {
      ++pos_;
      out.push_back(expr(need));
    }
    return out;
  }

  void directive(const token& d) {
    const std::string& n = d.text;
    if (n == ".text") {
      select_section("text", default_text_base, false, true);
    } else if (n == ".data") {
      select_section("data", default_data_base, true, false);
    } else if (n == ".rodata") {
      select_section("rodata", default_rodata_base, false, false);
    } else if (n == ".section") {
      if (at_end() || toks_[pos_].type != tok::ident) error(ek::syntax, col(), "expected section name");
      const std::string name = toks_[pos_++].text;
      std::optional<std::uint32_t> base;
      bool w = false, x = false;
      if (peek_punct(',')) {
        ++pos_;
        base = imm32(true);
        if (peek_punct(',')) {
          ++pos_;
          if (at_end() || (toks_[pos_].type != tok::ident && toks_[pos_].type != tok::string))
            error(ek::syntax, col(), "expected section flags");
          const auto& f = toks_[pos_];
          for (char c : f.text) {
            if (c == 'w') w = true;
            else if (c == 'x') x = true;
            else if (c != 'r' && c != '-') error(ek::syntax, f.col, fmt::format("bad section flag '{}'", c));
          }
          ++pos_;
        }
      }
      select_section(name, base, w, x);
    } else if (n == ".stack") {
      const std::size_t at = col();
      const auto size = expr(true);
      if (size <= 0 || size > 0x100000) error(ek::out_of_range, at, "bad stack size");
      std::uint32_t base = default_stack_base;
      if (peek_punct(',')) {
        ++pos_;
        base = imm32(true);
      }
      const auto saved = current_;
      select_section("stack", base, true, false);
      cur().bytes.assign(static_cast<std::size_t>(size), 0);
      current_ = saved;
    } else if (n == ".entry") {
      entry_ = imm32();
    } else if (n == ".equ") {
      if (at_end() || toks_[pos_].type != tok::ident) error(ek::syntax, col(), "expected symbol name");
      const auto& name = toks_[pos_++];
      expect_punct(',');
      define(name.text, expr(true), name.col);
    } else if (n == ".align") {
      const std::size_t at = col();
      const auto a = expr(true);
      if (a <= 0 || a > 4096) error(ek::out_of_range, at, "bad alignment");
      while (cur().bytes.size() % static_cast<std::size_t>(a) != 0) cur().bytes.push_back(0);
    } else if (n == ".space") {
      const std::size_t at = col();
      const auto count = expr(true);
      if (count < 0 || count > 0x1000000) error(ek::out_of_range, at, "bad .space size");
      std::uint8_t fill = 0;
      if (peek_punct(',')) {
        ++pos_;
        const std::size_t fat = col();
        const auto f = expr(true);
        if (f < -128 || f > 255) error(ek::out_of_range, fat, "fill byte out of range");
        fill = static_cast<std::uint8_t>(f);
      }
      cur().bytes.insert(cur().bytes.end(), static_cast<std::size_t>(count), fill);
    } else if (n == ".byte" || n == ".half" || n == ".word") {
      const unsigned width = n == ".byte" ? 1 : n == ".half" ? 2 : 4;
      const std::int64_t lo = width == 4 ? std::numeric_limits<std::int32_t>::min() : -(std::int64_t{1} << (8 * width - 1));
      const std::int64_t hi = (std::int64_t{1} << (8 * width)) - 1;
      while (true) {
        const std::size_t at = col();
        const auto v = expr();
        if (v < lo || v > hi) error(ek::out_of_range, at, fmt::format("value {} does not fit in {} bytes", v, width));
        emit(static_cast<std::uint32_t>(v), width);
        if (!peek_punct(',')) break;
        ++pos_;
      }
    } else if (n == ".ascii") {
      if (at_end() || toks_[pos_].type != tok::string) error(ek::syntax, col(), "expected string");
      for (char c : toks_[pos_].text) cur().bytes.push_back(static_cast<std::uint8_t>(c));
      ++pos_;
    } else {
      error(ek::syntax, d.col, fmt::format("unknown directive '{}'", n));
    }
  }

  void comma() { expect_punct(','); }

  void instruction_line(const token& m) {
    const auto op = opcode_from_mnemonic(m.text);
    if (!op) error(ek::syntax, m.col, fmt::format("unknown mnemonic '{}'", m.text));
    instruction in;
    in.op = *op;
    switch (shape_of(*op)) {
    case operand_shape::none: break;
    case operand_shape::reg_imm:
      in.rd = static_cast<std::uint8_t>(reg());
      comma();
      in.imm = imm32();
      break;
    case operand_shape::reg_reg:
      in.rd = static_cast<std::uint8_t>(reg());
      comma();
      in.rs = static_cast<std::uint8_t>(reg());
      break;
    case operand_shape::alu:
    case operand_shape::compare:
      if (shape_of(*op) == operand_shape::alu) {
        in.rd = static_cast<std::uint8_t>(reg());
        comma();
      }
      in.rs = static_cast<std::uint8_t>(reg());
      comma();
      if (peek_register()) {
        in.rt = static_cast<std::uint8_t>(reg());
      } else {
        in.immediate = true;
        in.imm = imm32();
      }
      break;
    case operand_shape::load: {
      in.rd = static_cast<std::uint8_t>(reg());
      comma();
      auto [b, disp] = mem_operand();
      in.rs = static_cast<std::uint8_t>(b);
      in.imm = disp;
      break;
    }
    case operand_shape::store: {
      auto [b, disp] = mem_operand();
      in.rs = static_cast<std::uint8_t>(b);
      in.imm = disp;
      comma();
      in.rt = static_cast<std::uint8_t>(reg());
      break;
    }
    case operand_shape::target: in.imm = imm32(); break;
    case operand_shape::jump_target:
      if (peek_register()) {
        in.rs = static_cast<std::uint8_t>(reg());
      } else {
        in.immediate = true;
        in.imm = imm32();
      }
      break;
    }
    const auto bytes = encode(in);
    cur().bytes.insert(cur().bytes.end(), bytes.begin(), bytes.end());
  }

  std::vector<std::string_view> lines_;
  std::vector<token> toks_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
  int pass_ = 1;
  std::vector<section_builder> sections_;
  std::size_t current_ = 0;
  std::map<std::string, std::int64_t> symbols_;
  std::optional<std::uint32_t> entry_;
};

void byte_lines(std::string& out, const std::uint8_t* p, std::size_t n) {
  std::size_t i = 0;
  while (i < n) {
    std::size_t zeros = 0;
    while (i + zeros < n && p[i + zeros] == 0) ++zeros;
    if (zeros >= 16) {
      out += fmt::format("  .space {}\n", zeros);
      i += zeros;
      continue;
    }
    const std::size_t chunk = std::min<std::size_t>(16, n - i);
    out += "  .byte ";
    for (std::size_t k = 0; k < chunk; ++k) out += fmt::format("{}{:#04x}", k ? ", " : "", p[i + k]);
    out += '\n';
    i += chunk;
  }
}

} // namespace

program_image assemble(std::string_view source) { return assembler(source).run(); }

assembly assemble_program(std::string_view source) {
  assembler a(source);
  assembly out;
  out.image = a.run();
  for (const auto& [name, v] : a.symbols()) out.symbols[name] = static_cast<std::uint32_t>(v);
  return out;
}

std::string disassemble_image(const program_image& image) {
  std::string out = fmt::format(".entry {:#010x}\n", image.entry);
  for (const auto& s : image.sections) {
    std::string flags = "r";
    if (s.writable) flags += 'w';
    if (s.executable) flags += 'x';
    out += fmt::format("\n.section {}, {:#010x}, {}\n", s.name, s.base, flags);
    if (!s.executable) {
      byte_lines(out, s.bytes.data(), s.bytes.size());
      continue;
    }
    std::size_t i = 0;
    for (; i + instruction_size <= s.bytes.size(); i += instruction_size) {
      encoded_instruction raw;
      std::copy_n(s.bytes.begin() + static_cast<std::ptrdiff_t>(i), instruction_size, raw.begin());
      if (auto in = decode(raw))
        out += fmt::format("  {}\n", disassemble(*in));
      else
        byte_lines(out, raw.data(), raw.size());
    }
    byte_lines(out, s.bytes.data() + i, s.bytes.size() - i);
  }
  return out;
}

} // namespace avl
