#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace trident::csv {

/// One parsed row keyed by header name.
using Row = std::map<std::string, std::string, std::less<>>;

/// RFC 4180 style reader: quoted fields, doubled quotes, CRLF tolerated.
/// The first record is the header.
std::vector<Row> read(std::istream& in);
std::vector<Row> read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace trident::csv
