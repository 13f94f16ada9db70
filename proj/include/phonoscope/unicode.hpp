#pragma once

#include <string>
#include <string_view>

namespace phonoscope {

// NFC normalization of UTF-8 text. Invalid UTF-8 is returned unchanged.
std::string nfc(std::string_view utf8);

} // namespace phonoscope
