#pragma once
//
// Binary `.cvmi` image format. All integers are little-endian and fixed
// width; strings are a u32 byte length followed by UTF-8 bytes.
//
//   image   := "CVMI" u32:version u8:mode u32:class_count class* string:entry_class string:entry_selector
//   class   := string:name string:superclass u32:field_count string* u32:method_count method*
//   method  := string:selector u16:num_args u16:num_locals u32:literal_count literal* u32:code_len u8*
//   literal := u8:tag payload
//              tag 0 integer  i64
//              tag 1 symbol   string
//              tag 2 string   string
//              tag 3 global   string
//              tag 4 block    method

#include "cvm/bytecode.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cvm::bytecode {

std::vector<std::uint8_t> write_image(const ProgramImage& image);

/// Throws DecodeError with kind BadMagic, UnsupportedVersion or CorruptSection.
ProgramImage read_image(std::span<const std::uint8_t> bytes);

/// File helpers; I/O failures raise Error(Io).
ProgramImage load_image_file(const std::filesystem::path& path);
void save_image_file(const std::filesystem::path& path, const ProgramImage& image);

}  // namespace cvm::bytecode
