#pragma once

#include <string>
#include <vector>

#include "aegis/contracts.hpp"

namespace aegis {

std::string read_file(const std::string& path);          // throws ConfigError
void write_file(const std::string& path, const std::string& content);

// One canonical SignedEvent per line. Throws ParseError with the 1-based
// line number on malformed input.
std::vector<SignedEvent> parse_event_log(const std::string& jsonl_text);
std::vector<SignedEvent> load_event_log(const std::string& path);
std::string render_event_log(const std::vector<SignedEvent>& events);

}  // namespace aegis
