// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gridforge::csv {

/// Splits `text` into records of fields. Double-quote quoting per RFC 4180
/// with a configurable delimiter; records end at LF or CRLF. A trailing
/// newline does not produce an empty final record.
std::vector<std::vector<std::string>> parse(std::string_view text, char delimiter);

/// Quotes `field` when it contains the delimiter, a quote or a line break.
std::string render_field(std::string_view field, char delimiter);

void append_record(std::string& out, const std::vector<std::string>& fields, char delimiter);

} // namespace gridforge::csv
