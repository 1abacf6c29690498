// SPDX-License-Identifier: Apache-2.0
#include "gridforge/csv.hpp"

#include "gridforge/core.hpp"

namespace gridforge::csv {

std::vector<std::vector<std::string>> parse(std::string_view text, char delimiter)
{
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;

    auto end_field = [&]() {
        record.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_record = [&]() {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    std::size_t i = 0;
    const std::size_t n = text.size();
    bool any = false;
    while (i < n) {
        any = true;
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                    continue;
                }
                in_quotes = false;
                ++i;
                continue;
            }
            field += c;
            ++i;
            continue;
        }
        if (c == '"' && field.empty() && !field_was_quoted) {
            in_quotes = true;
            field_was_quoted = true;
            ++i;
            continue;
        }
        if (c == delimiter) {
            end_field();
            ++i;
            continue;
        }
        if (c == '\n') {
            end_record();
            ++i;
            continue;
        }
        if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
            end_record();
            i += 2;
            continue;
        }
        field += c;
        ++i;
    }
    if (in_quotes)
        throw ParseError("unterminated quoted field at end of input");
    // Emit the last record unless the text ended with a record terminator.
    if (any && (!text.empty() && text.back() != '\n'))
        end_record();
    return records;
}

std::string render_field(std::string_view field, char delimiter)
{
    bool needs_quotes = false;
    for (char c : field) {
        if (c == delimiter || c == '"' || c == '\n' || c == '\r') {
            needs_quotes = true;
            break;
        }
    }
    if (!needs_quotes)
        return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out += '"';
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void append_record(std::string& out, const std::vector<std::string>& fields, char delimiter)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0)
            out += delimiter;
        out += render_field(fields[i], delimiter);
    }
    out += '\n';
}

} // namespace gridforge::csv
