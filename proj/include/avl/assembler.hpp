#pragma once

#include "avl/image.hpp"

#include <cstddef>
#include <stdexcept>
#include <map>
#include <string>
#include <string_view>

namespace avl {

class assemble_error : public std::runtime_error {
public:
  enum class kind { syntax, undefined_label, duplicate_label, out_of_range };

  assemble_error(kind k, std::size_t line, std::size_t column, const std::string& msg);

  kind error_kind() const { return kind_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

private:
  kind kind_;
  std::size_t line_;
  std::size_t column_;
};

// Default section bases used by the .text/.rodata/.data directives and .stack.
inline constexpr std::uint32_t default_text_base = 0x00001000;
inline constexpr std::uint32_t default_rodata_base = 0x00008000;
inline constexpr std::uint32_t default_data_base = 0x00010000;
inline constexpr std::uint32_t default_stack_base = 0x000f0000;

/// Two-pass assembler. Grammar is documented in docs/formats.md.
program_image assemble(std::string_view source);

struct assembly {
  program_image image;
  std::map<std::string, std::uint32_t> symbols; // labels and .equ names
};

/// assemble() plus the resolved symbol table.
assembly assemble_program(std::string_view source);

/// Source text that assembles back to exactly `image`.
std::string disassemble_image(const program_image& image);

} // namespace avl
