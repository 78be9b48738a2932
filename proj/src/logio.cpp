#include "aegis/logio.hpp"

#include <fstream>
#include <sstream>

namespace aegis {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::config_error, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::config_error, "cannot write " + path);
    out << content;
}

std::vector<SignedEvent> parse_event_log(const std::string& jsonl_text) {
    std::vector<SignedEvent> events;
    std::size_t line_no = 0;
    std::istringstream in(jsonl_text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            events.push_back(event_from_json(json::parse(line)));
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            fail(Errc::parse_error, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return events;
}

std::vector<SignedEvent> load_event_log(const std::string& path) {
    return parse_event_log(read_file(path));
}

std::string render_event_log(const std::vector<SignedEvent>& events) {
    std::string out;
    for (const auto& ev : events) {
        out += event_to_json(ev).dump();
        out.push_back('\n');
    }
    return out;
}

}  // namespace aegis
