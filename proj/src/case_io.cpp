#include "scopf/case_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "scopf/power_flow.hpp"

namespace scopf {

namespace {

using nlohmann::json;

std::pair<int, int> line_column_at(const std::string& text, std::size_t byte)
{
    int line = 1;
    int column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

[[noreturn]] void fail(const std::string& message, const std::string& entity)
{
    throw CaseError(message + " [" + entity + "]", -1, -1, entity);
}

// ---------------------------------------------------------------- JSON ----

void check_keys(const json& object, std::initializer_list<const char*> allowed,
                const std::string& entity)
{
    for (const auto& item : object.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return item.key() == k; });
        if (!known) fail("unknown field '" + item.key() + "'", entity);
    }
}

double num_or(const json& o, const char* key, double fallback, const std::string& entity)
{
    if (!o.contains(key)) return fallback;
    if (!o[key].is_number()) fail(std::string("field '") + key + "' must be a number", entity);
    return o[key].get<double>();
}

double num_req(const json& o, const char* key, const std::string& entity)
{
    if (!o.contains(key)) fail(std::string("missing field '") + key + "'", entity);
    return num_or(o, key, 0.0, entity);
}

int int_or(const json& o, const char* key, int fallback, const std::string& entity)
{
    if (!o.contains(key)) return fallback;
    if (!o[key].is_number_integer())
        fail(std::string("field '") + key + "' must be an integer", entity);
    return o[key].get<int>();
}

int int_req(const json& o, const char* key, const std::string& entity)
{
    if (!o.contains(key)) fail(std::string("missing field '") + key + "'", entity);
    return int_or(o, key, 0, entity);
}

bool bool_or(const json& o, const char* key, bool fallback, const std::string& entity)
{
    if (!o.contains(key)) return fallback;
    if (!o[key].is_boolean())
        fail(std::string("field '") + key + "' must be a boolean", entity);
    return o[key].get<bool>();
}

std::string str_or(const json& o, const char* key, const std::string& fallback,
                   const std::string& entity)
{
    if (!o.contains(key)) return fallback;
    if (!o[key].is_string()) fail(std::string("field '") + key + "' must be a string", entity);
    return o[key].get<std::string>();
}

int bus_type_from_string(const std::string& s, const std::string& entity)
{
    if (s == "pq") return 1;
    if (s == "pv") return 2;
    if (s == "slack") return 3;
    fail("bus type must be one of 'slack', 'pv', 'pq'", entity);
}

const char* bus_type_to_string(int type)
{
    switch (type) {
        case 1: return "pq";
        case 2: return "pv";
        default: return "slack";
    }
}

CaseTap parse_tap(const json& o, const std::string& entity)
{
    check_keys(o,
               {"voltage_step_min", "voltage_step_max", "phase_step_min", "phase_step_max",
                "voltage_increment", "phase_increment_deg"},
               entity);
    CaseTap tap;
    tap.voltage_step_min = int_or(o, "voltage_step_min", tap.voltage_step_min, entity);
    tap.voltage_step_max = int_or(o, "voltage_step_max", tap.voltage_step_max, entity);
    tap.phase_step_min = int_or(o, "phase_step_min", tap.phase_step_min, entity);
    tap.phase_step_max = int_or(o, "phase_step_max", tap.phase_step_max, entity);
    tap.voltage_increment = num_or(o, "voltage_increment", tap.voltage_increment, entity);
    tap.phase_increment_deg =
        num_or(o, "phase_increment_deg", tap.phase_increment_deg, entity);
    return tap;
}

CaseDocument parse_json_case(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column_at(text, e.byte > 0 ? e.byte - 1 : 0);
        throw CaseError("syntax error: " + std::string(e.what()), line, column);
    }
    if (!root.is_object()) throw CaseError("case document must be a JSON object", 1, 1);

    const std::string top = "case";
    check_keys(root,
               {"format", "version", "name", "base_mva", "enable_in_phase_taps",
                "enable_quadrature_taps", "c_loss", "buses", "branches", "generators"},
               top);
    if (str_or(root, "format", "", top) != "scopf-case")
        fail("field 'format' must be \"scopf-case\"", top);
    if (int_or(root, "version", 0, top) != 1) fail("field 'version' must be 1", top);

    CaseDocument doc;
    doc.name = str_or(root, "name", doc.name, top);
    doc.base_mva = num_or(root, "base_mva", doc.base_mva, top);
    doc.enable_in_phase_taps =
        bool_or(root, "enable_in_phase_taps", doc.enable_in_phase_taps, top);
    doc.enable_quadrature_taps =
        bool_or(root, "enable_quadrature_taps", doc.enable_quadrature_taps, top);
    doc.c_loss = num_or(root, "c_loss", doc.c_loss, top);

    if (!root.contains("buses") || !root["buses"].is_array())
        fail("field 'buses' must be an array", top);
    for (const json& o : root["buses"]) {
        const std::string entity = "bus " + std::to_string(doc.buses.size() + 1);
        if (!o.is_object()) fail("bus entries must be objects", entity);
        check_keys(o,
                   {"id", "type", "p_load_mw", "q_load_mvar", "gs_mw", "bs_mvar",
                    "v_rated_kv", "v_min", "v_max"},
                   entity);
        CaseBus bus;
        bus.id = int_req(o, "id", entity);
        if (!o.contains("type")) fail("missing field 'type'", entity);
        if (!o["type"].is_string()) fail("field 'type' must be a string", entity);
        bus.type = bus_type_from_string(o["type"].get<std::string>(), entity);
        bus.p_load_mw = num_or(o, "p_load_mw", 0.0, entity);
        bus.q_load_mvar = num_or(o, "q_load_mvar", 0.0, entity);
        bus.gs_mw = num_or(o, "gs_mw", 0.0, entity);
        bus.bs_mvar = num_or(o, "bs_mvar", 0.0, entity);
        bus.v_rated_kv = num_or(o, "v_rated_kv", 0.0, entity);
        bus.v_min = num_or(o, "v_min", bus.v_min, entity);
        bus.v_max = num_or(o, "v_max", bus.v_max, entity);
        doc.buses.push_back(bus);
    }

    if (root.contains("branches")) {
        if (!root["branches"].is_array()) fail("field 'branches' must be an array", top);
        for (const json& o : root["branches"]) {
            const std::string entity = "branch " + std::to_string(doc.branches.size() + 1);
            if (!o.is_object()) fail("branch entries must be objects", entity);
            check_keys(o,
                       {"from", "to", "r", "x", "b", "rate_mva", "transformer", "ratio",
                        "angle_deg", "vector_group_k", "tap"},
                       entity);
            CaseBranch br;
            br.from = int_req(o, "from", entity);
            br.to = int_req(o, "to", entity);
            br.r = num_req(o, "r", entity);
            br.x = num_req(o, "x", entity);
            br.b = num_or(o, "b", 0.0, entity);
            br.rate_mva = num_or(o, "rate_mva", 0.0, entity);
            br.transformer = bool_or(o, "transformer", false, entity);
            br.ratio = num_or(o, "ratio", 1.0, entity);
            br.angle_deg = num_or(o, "angle_deg", 0.0, entity);
            br.vector_group_k = int_or(o, "vector_group_k", 0, entity);
            if (o.contains("tap")) {
                if (!o["tap"].is_object()) fail("field 'tap' must be an object", entity);
                br.tap = parse_tap(o["tap"], entity + " tap");
            } else if (br.transformer) {
                br.tap = CaseTap{};  // controllable with the default ranges
            }
            doc.branches.push_back(br);
        }
    }

    if (root.contains("generators")) {
        if (!root["generators"].is_array()) fail("field 'generators' must be an array", top);
        for (const json& o : root["generators"]) {
            const std::string entity =
                "generator " + std::to_string(doc.generators.size() + 1);
            if (!o.is_object()) fail("generator entries must be objects", entity);
            check_keys(o,
                       {"bus", "p_mw", "q_mvar", "p_min_mw", "p_max_mw", "q_min_mvar",
                        "q_max_mvar", "v_set", "cost", "label"},
                       entity);
            CaseGenerator g;
            g.bus = int_req(o, "bus", entity);
            g.p_mw = num_or(o, "p_mw", 0.0, entity);
            g.q_mvar = num_or(o, "q_mvar", 0.0, entity);
            g.p_min_mw = num_or(o, "p_min_mw", 0.0, entity);
            g.p_max_mw = num_or(o, "p_max_mw", 0.0, entity);
            g.q_min_mvar = num_or(o, "q_min_mvar", 0.0, entity);
            g.q_max_mvar = num_or(o, "q_max_mvar", 0.0, entity);
            g.v_set = num_or(o, "v_set", 1.0, entity);
            g.cost = num_or(o, "cost", 0.0, entity);
            g.label = str_or(o, "label", "G" + std::to_string(doc.generators.size() + 1),
                             entity);
            doc.generators.push_back(g);
        }
    }

    return doc;
}

// ----------------------------------------------------------- MATPOWER ----

struct MpcMatrix {
    std::vector<std::vector<double>> rows;
    std::vector<int> row_lines;
};

bool token_boundary(char c) { return !(std::isalnum(static_cast<unsigned char>(c)) || c == '_'); }

/// Finds "mpc.<field>" as a whole token and returns the line index, or -1.
int find_assignment(const std::vector<std::string>& lines, const std::string& field)
{
    const std::string needle = "mpc." + field;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& s = lines[i];
        const std::size_t pos = s.find(needle);
        if (pos == std::string::npos) continue;
        const std::size_t end = pos + needle.size();
        if (end < s.size() && !token_boundary(s[end])) continue;
        if (s.find('=', end) == std::string::npos) continue;
        return static_cast<int>(i);
    }
    return -1;
}

std::vector<double> parse_row(const std::string& row, int line)
{
    std::vector<double> values;
    std::istringstream in(row);
    std::string token;
    while (in >> token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            throw CaseError("expected a number, found '" + token + "'", line, 1);
        }
        if (used != token.size())
            throw CaseError("expected a number, found '" + token + "'", line, 1);
        values.push_back(v);
    }
    return values;
}

MpcMatrix parse_matrix(const std::vector<std::string>& lines, int start, const std::string& field)
{
    MpcMatrix matrix;
    std::size_t i = static_cast<std::size_t>(start);
    const std::size_t open = lines[i].find('[');
    if (open == std::string::npos)
        throw CaseError("expected '[' after mpc." + field, start + 1, 1);

    std::string pending;
    int pending_line = start + 1;
    const auto blank = [](const std::string& s) {
        return s.find_first_not_of(" \t\r") == std::string::npos;
    };
    const auto flush = [&] {
        if (!blank(pending)) {
            matrix.rows.push_back(parse_row(pending, pending_line));
            matrix.row_lines.push_back(pending_line);
        }
        pending.clear();
    };

    std::string chunk = lines[i].substr(open + 1);
    while (true) {
        bool closed = false;
        const std::size_t close = chunk.find(']');
        if (close != std::string::npos) {
            chunk = chunk.substr(0, close);
            closed = true;
        }
        for (char c : chunk) {
            if (c == ';') {
                flush();
            } else {
                if (blank(pending) && !std::isspace(static_cast<unsigned char>(c)))
                    pending_line = static_cast<int>(i) + 1;
                pending += c;
            }
        }
        flush();  // a line break ends the row, ';'-terminated or not
        if (closed) break;
        ++i;
        if (i >= lines.size())
            throw CaseError("unterminated matrix mpc." + field, start + 1, 1);
        chunk = lines[i];
    }
    return matrix;
}

int int_column(double v, int line, const char* what)
{
    const double rounded = std::round(v);
    if (std::abs(v - rounded) > 1e-9)
        throw CaseError(std::string(what) + " must be an integer", line, 1);
    return static_cast<int>(rounded);
}

CaseDocument parse_mpc_case(const std::string& text)
{
    // Comment-stripped view with stable line numbering.
    std::vector<std::string> lines;
    {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            const std::size_t comment = line.find('%');
            if (comment != std::string::npos) line = line.substr(0, comment);
            lines.push_back(line);
        }
    }

    CaseDocument doc;
    doc.name = "mpc-case";
    for (const std::string& s : lines) {
        const std::size_t fn = s.find("function");
        if (fn == std::string::npos) continue;
        const std::size_t eq = s.find('=', fn);
        if (eq == std::string::npos) continue;
        std::istringstream name_in(s.substr(eq + 1));
        std::string name;
        if (name_in >> name) doc.name = name;
        break;
    }

    const int base_line = find_assignment(lines, "baseMVA");
    if (base_line >= 0) {
        const std::string& s = lines[static_cast<std::size_t>(base_line)];
        std::string rhs = s.substr(s.find('=') + 1);
        std::replace(rhs.begin(), rhs.end(), ';', ' ');
        const std::vector<double> v = parse_row(rhs, base_line + 1);
        if (v.size() != 1)
            throw CaseError("mpc.baseMVA must be a single number", base_line + 1, 1);
        doc.base_mva = v[0];
    }

    const int bus_line = find_assignment(lines, "bus");
    if (bus_line < 0) throw CaseError("missing mpc.bus matrix", 1, 1);
    const MpcMatrix bus = parse_matrix(lines, bus_line, "bus");
    for (std::size_t i = 0; i < bus.rows.size(); ++i) {
        const std::vector<double>& row = bus.rows[i];
        const int line = bus.row_lines[i];
        if (row.size() < 13)
            throw CaseError("bus rows need 13 columns, found " + std::to_string(row.size()),
                            line, 1);
        CaseBus b;
        b.id = int_column(row[0], line, "bus id");
        b.type = int_column(row[1], line, "bus type");
        b.p_load_mw = row[2];
        b.q_load_mvar = row[3];
        b.gs_mw = row[4];
        b.bs_mvar = row[5];
        b.v_rated_kv = row[9];
        b.v_max = row[11];
        b.v_min = row[12];
        doc.buses.push_back(b);
    }

    const int gen_line = find_assignment(lines, "gen");
    if (gen_line >= 0) {
        const MpcMatrix gen = parse_matrix(lines, gen_line, "gen");
        for (std::size_t i = 0; i < gen.rows.size(); ++i) {
            const std::vector<double>& row = gen.rows[i];
            const int line = gen.row_lines[i];
            if (row.size() < 10)
                throw CaseError(
                    "gen rows need 10 columns, found " + std::to_string(row.size()), line, 1);
            if (row[7] <= 0.0) continue;  // out of service
            CaseGenerator g;
            g.bus = int_column(row[0], line, "generator bus");
            g.p_mw = row[1];
            g.q_mvar = row[2];
            g.q_max_mvar = row[3];
            g.q_min_mvar = row[4];
            g.v_set = row[5];
            g.p_max_mw = row[8];
            g.p_min_mw = row[9];
            g.label = "G" + std::to_string(doc.generators.size() + 1);
            doc.generators.push_back(g);
        }
    }

    const int branch_line = find_assignment(lines, "branch");
    if (branch_line < 0) throw CaseError("missing mpc.branch matrix", 1, 1);
    const MpcMatrix branch = parse_matrix(lines, branch_line, "branch");
    for (std::size_t i = 0; i < branch.rows.size(); ++i) {
        const std::vector<double>& row = branch.rows[i];
        const int line = branch.row_lines[i];
        if (row.size() < 11)
            throw CaseError("branch rows need 11 columns, found " + std::to_string(row.size()),
                            line, 1);
        if (row[10] <= 0.0) continue;  // out of service
        CaseBranch br;
        const int f = int_column(row[0], line, "branch from bus");
        const int t = int_column(row[1], line, "branch to bus");
        br.r = row[2];
        br.x = row[3];
        br.b = row[4];
        br.rate_mva = row[5];
        const double tap_magnitude = row[8];
        const double shift_deg = row[9];
        if (tap_magnitude != 0.0 || shift_deg != 0.0) {
            // Off-nominal ratio given at the source's from side; this model
            // keeps the ideal transformer at the to side, so the endpoints
            // swap and the ratio inverts.
            br.transformer = true;
            br.from = t;
            br.to = f;
            br.ratio = 1.0 / (tap_magnitude == 0.0 ? 1.0 : tap_magnitude);
            br.angle_deg = -shift_deg;
            br.tap = CaseTap{};
        } else {
            br.from = f;
            br.to = t;
        }
        doc.branches.push_back(br);
    }

    return doc;
}

// --------------------------------------------------------- validation ----

void validate_document(const CaseDocument& doc)
{
    if (!(doc.base_mva > 0.0)) fail("base_mva must be positive", "case");
    if (!(doc.c_loss >= 0.0)) fail("c_loss must be non-negative", "case");
    if (doc.buses.empty()) fail("case has no buses", "case");

    std::set<int> ids;
    int slack_count = 0;
    for (const CaseBus& b : doc.buses) {
        const std::string entity = "bus " + std::to_string(b.id);
        if (!ids.insert(b.id).second) fail("duplicate bus id", entity);
        if (b.type < 1 || b.type > 3) fail("bus type must be 1 (pq), 2 (pv), or 3 (slack)",
                                           entity);
        if (b.type == 3) ++slack_count;
        if (!(b.v_min < b.v_max)) fail("voltage band is empty or inverted", entity);
        if (!(b.v_rated_kv >= 0.0)) fail("rated voltage must be non-negative", entity);
    }
    if (slack_count != 1)
        fail("exactly one slack bus required, found " + std::to_string(slack_count), "case");

    for (std::size_t i = 0; i < doc.branches.size(); ++i) {
        const CaseBranch& br = doc.branches[i];
        const std::string entity = "branch " + std::to_string(i + 1) + " (" +
                                   std::to_string(br.from) + "-" + std::to_string(br.to) + ")";
        if (!ids.count(br.from)) fail("unknown from bus", entity);
        if (!ids.count(br.to)) fail("unknown to bus", entity);
        if (br.from == br.to) fail("branch endpoints coincide", entity);
        if (!(br.rate_mva >= 0.0)) fail("rate must be non-negative", entity);
        if (br.tap.has_value() != br.transformer)
            fail("tap data present if and only if the transformer flag is set", entity);
        if (br.transformer) {
            if (!(br.ratio > 0.0)) fail("transformer ratio must be positive", entity);
            if (br.vector_group_k < 0 || br.vector_group_k > 11)
                fail("vector group code must lie in [0, 11]", entity);
            const CaseTap& tap = *br.tap;
            if (tap.voltage_step_min > 0 || tap.voltage_step_max < 0 ||
                tap.phase_step_min > 0 || tap.phase_step_max < 0)
                fail("tap ranges must bracket the neutral position", entity);
            if (!(tap.voltage_increment >= 0.0) || !(tap.phase_increment_deg >= 0.0))
                fail("tap increments must be non-negative", entity);
            const int deepest =
                std::max(std::abs(tap.voltage_step_min), std::abs(tap.voltage_step_max));
            if (tap.voltage_increment * deepest >= 1.0)
                fail("in-phase range reaches a vanishing ratio", entity);
        } else {
            if (br.ratio != 1.0 || br.angle_deg != 0.0 || br.vector_group_k != 0)
                fail("plain lines cannot carry ratio, shift, or vector group", entity);
        }
    }

    for (std::size_t i = 0; i < doc.generators.size(); ++i) {
        const CaseGenerator& g = doc.generators[i];
        const std::string entity = "generator " + std::to_string(i + 1) + " (bus " +
                                   std::to_string(g.bus) + ")";
        if (!ids.count(g.bus)) fail("unknown bus", entity);
        if (!(g.p_min_mw <= g.p_max_mw)) fail("active power bounds inverted", entity);
        if (!(g.q_min_mvar <= g.q_max_mvar)) fail("reactive power bounds inverted", entity);
        if (!(g.cost >= 0.0)) fail("redispatch cost must be non-negative", entity);
        if (!(g.v_set > 0.0)) fail("voltage setpoint must be positive", entity);
    }
}

std::string format_double(double v)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

void write_text_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out.good()) throw std::runtime_error("cannot write " + path);
}

}  // namespace

// ------------------------------------------------------------- public ----

CaseDocument parse_case(const std::string& text)
{
    const std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw CaseError("empty case text", 1, 1);

    CaseDocument doc;
    if (text[first] == '{') {
        doc = parse_json_case(text);
    } else if (text.find("mpc.") != std::string::npos) {
        doc = parse_mpc_case(text);
    } else {
        throw CaseError("unrecognized case format: expected JSON or mpc text", 1, 1);
    }
    validate_document(doc);
    return doc;
}

CaseDocument parse_case_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CaseError("cannot read case file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_case(buffer.str());
}

std::string write_case(const CaseDocument& doc)
{
    json root;
    root["format"] = "scopf-case";
    root["version"] = 1;
    root["name"] = doc.name;
    root["base_mva"] = doc.base_mva;
    root["enable_in_phase_taps"] = doc.enable_in_phase_taps;
    root["enable_quadrature_taps"] = doc.enable_quadrature_taps;
    root["c_loss"] = doc.c_loss;

    root["buses"] = json::array();
    for (const CaseBus& b : doc.buses) {
        json o;
        o["id"] = b.id;
        o["type"] = bus_type_to_string(b.type);
        o["p_load_mw"] = b.p_load_mw;
        o["q_load_mvar"] = b.q_load_mvar;
        o["gs_mw"] = b.gs_mw;
        o["bs_mvar"] = b.bs_mvar;
        o["v_rated_kv"] = b.v_rated_kv;
        o["v_min"] = b.v_min;
        o["v_max"] = b.v_max;
        root["buses"].push_back(o);
    }

    root["branches"] = json::array();
    for (const CaseBranch& br : doc.branches) {
        json o;
        o["from"] = br.from;
        o["to"] = br.to;
        o["r"] = br.r;
        o["x"] = br.x;
        o["b"] = br.b;
        o["rate_mva"] = br.rate_mva;
        o["transformer"] = br.transformer;
        o["ratio"] = br.ratio;
        o["angle_deg"] = br.angle_deg;
        o["vector_group_k"] = br.vector_group_k;
        if (br.tap) {
            json t;
            t["voltage_step_min"] = br.tap->voltage_step_min;
            t["voltage_step_max"] = br.tap->voltage_step_max;
            t["phase_step_min"] = br.tap->phase_step_min;
            t["phase_step_max"] = br.tap->phase_step_max;
            t["voltage_increment"] = br.tap->voltage_increment;
            t["phase_increment_deg"] = br.tap->phase_increment_deg;
            o["tap"] = t;
        }
        root["branches"].push_back(o);
    }

    root["generators"] = json::array();
    for (const CaseGenerator& g : doc.generators) {
        json o;
        o["bus"] = g.bus;
        o["p_mw"] = g.p_mw;
        o["q_mvar"] = g.q_mvar;
        o["p_min_mw"] = g.p_min_mw;
        o["p_max_mw"] = g.p_max_mw;
        o["q_min_mvar"] = g.q_min_mvar;
        o["q_max_mvar"] = g.q_max_mvar;
        o["v_set"] = g.v_set;
        o["cost"] = g.cost;
        o["label"] = g.label;
        root["generators"].push_back(o);
    }

    return root.dump(2) + "\n";
}

void apply_scenario(CaseDocument& doc, int scenario)
{
    switch (scenario) {
        case 1:
            doc.enable_in_phase_taps = false;
            doc.enable_quadrature_taps = false;
            break;
        case 2:
            doc.enable_in_phase_taps = true;
            doc.enable_quadrature_taps = false;
            break;
        case 3:
            doc.enable_in_phase_taps = true;
            doc.enable_quadrature_taps = true;
            break;
        default:
            throw CaseError("scenario must be 1, 2, or 3, got " + std::to_string(scenario));
    }
}

CaseModel to_network(const CaseDocument& doc)
{
    CaseModel model;
    Network& net = model.network;
    net.base_mva = doc.base_mva;

    std::unordered_map<int, int> index;
    for (const CaseBus& b : doc.buses) {
        index.emplace(b.id, net.bus_count());
        Bus bus;
        bus.id = b.id;
        bus.kind = b.type == 3   ? BusKind::Slack
                   : b.type == 2 ? BusKind::VoltageControlled
                                 : BusKind::PowerControlled;
        bus.v_rated_kv = b.v_rated_kv;
        bus.v_min = b.v_min;
        bus.v_max = b.v_max;
        bus.g_shunt = b.gs_mw / doc.base_mva;
        bus.b_shunt = b.bs_mvar / doc.base_mva;
        bus.p0 = -b.p_load_mw / doc.base_mva;
        bus.q0 = -b.q_load_mvar / doc.base_mva;
        net.buses.push_back(bus);
    }
    for (const CaseGenerator& g : doc.generators) {
        Bus& bus = net.buses[static_cast<std::size_t>(index.at(g.bus))];
        bus.p0 += g.p_mw / doc.base_mva;
        bus.q0 += g.q_mvar / doc.base_mva;
    }

    for (std::size_t i = 0; i < doc.branches.size(); ++i) {
        const CaseBranch& br = doc.branches[i];
        const std::string entity = "branch " + std::to_string(i + 1) + " (" +
                                   std::to_string(br.from) + "-" + std::to_string(br.to) + ")";
        if (br.r == 0.0 && br.x == 0.0)
            fail("zero series impedance is not convertible to a T model", entity);

        // Symmetric pi to T: both series elements 2*ys + c, center shunt
        // (2*ys + c) * c / ys, with c the per-side charging admittance.
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex c(0.0, br.b / 2.0);
        TwoPort port;
        port.from_bus = index.at(br.from);
        port.to_bus = index.at(br.to);
        port.series_from = 2.0 * ys + c;
        port.series_to = port.series_from;
        port.shunt = port.series_from * c / ys;
        port.is_transformer = br.transformer;
        port.vector_group_k = br.vector_group_k;
        port.label = std::to_string(br.from) + "-" + std::to_string(br.to);
        if (br.rate_mva > 0.0) port.i_max = br.rate_mva / doc.base_mva;
        if (br.transformer) {
            const double angle = br.angle_deg * std::numbers::pi / 180.0 +
                                 br.vector_group_k * std::numbers::pi / 6.0;
            port.rated_ratio = std::polar(br.ratio, angle);
            const CaseTap& tap = *br.tap;
            if (doc.enable_in_phase_taps) {
                port.tap.voltage_step_min = tap.voltage_step_min;
                port.tap.voltage_step_max = tap.voltage_step_max;
            }
            if (doc.enable_quadrature_taps) {
                port.tap.phase_step_min = tap.phase_step_min;
                port.tap.phase_step_max = tap.phase_step_max;
            }
            port.tap.voltage_increment = tap.voltage_increment;
            port.tap.phase_increment = tap.phase_increment_deg * std::numbers::pi / 180.0;
        }
        net.ports.push_back(port);
    }

    net.validate();

    ScopfConfig& cfg = model.config;
    cfg.c_loss = doc.c_loss;
    const int n = net.bus_count();
    cfg.load_p = Eigen::VectorXd::Zero(n);
    cfg.load_q = Eigen::VectorXd::Zero(n);
    cfg.v_set0 = Eigen::VectorXd::Ones(n);
    for (const CaseBus& b : doc.buses) {
        const int k = index.at(b.id);
        cfg.load_p[k] = b.p_load_mw / doc.base_mva;
        cfg.load_q[k] = b.q_load_mvar / doc.base_mva;
    }
    for (const CaseGenerator& g : doc.generators) {
        Resource res;
        res.bus = index.at(g.bus);
        res.p_sched = g.p_mw;
        res.q_sched = g.q_mvar;
        res.p_min = g.p_min_mw;
        res.p_max = g.p_max_mw;
        res.q_min = g.q_min_mvar;
        res.q_max = g.q_max_mvar;
        res.cost = g.cost;
        res.label = g.label;
        cfg.resources.push_back(res);
        if (net.buses[static_cast<std::size_t>(res.bus)].kind != BusKind::PowerControlled &&
            cfg.v_set0[res.bus] == 1.0)
            cfg.v_set0[res.bus] = g.v_set;
    }

    return model;
}

const char* control_class_name(ControlClass cls)
{
    switch (cls) {
        case ControlClass::ActiveRedispatch: return "active_redispatch";
        case ControlClass::ReactiveRedispatch: return "reactive_redispatch";
        case ControlClass::VoltageSetpoint: return "voltage_setpoint";
        case ControlClass::TapInPhase: return "tap_in_phase";
        default: return "tap_quadrature";
    }
}

ExportPaths export_results(const MultiRunResult& result, const ScopfProblem& problem,
                           const PsoHyperparameters& hyper, const CaseDocument& doc,
                           const std::string& out_dir)
{
    if (result.runs.empty() || result.best_run < 0)
        throw std::invalid_argument("no runs to export");
    std::filesystem::create_directories(out_dir);
    const auto path_of = [&](const std::string& name) {
        return (std::filesystem::path(out_dir) / name).string();
    };

    ExportPaths paths;

    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "trace_run_%03zu.csv", i);
        std::ostringstream csv;
        csv << "iteration,global_best\n";
        const RunResult& run = result.runs[i];
        for (std::size_t t = 0; t < run.trace.size(); ++t)
            csv << (t + 1) << ',' << format_double(run.trace[t]) << '\n';
        const std::string p = path_of(name);
        write_text_file(p, csv.str());
        paths.traces.push_back(p);
    }

    const RunResult& best = result.runs[static_cast<std::size_t>(result.best_run)];
    const ScopfConfig& cfg = problem.config();
    const Network& net = problem.network();
    const ControlLayout& layout = problem.layout();
    const ControlVector controls = layout.unflatten(best.best_position, cfg);
    const Evaluation eval = problem.evaluate_full(controls);
    const ControlVector neutral = layout.neutral(cfg);
    const Evaluation base_eval = problem.evaluate_full(neutral);

    {
        std::ostringstream csv;
        csv << "bus_id,v_base_pu,angle_base_deg,v_best_pu,angle_best_deg\n";
        const auto deg = [](Complex v) { return std::arg(v) * 180.0 / std::numbers::pi; };
        for (int b = 0; b < net.bus_count(); ++b) {
            const Complex v0 = problem.base_state().v[b];
            const Complex v1 = eval.state.v[b];
            csv << net.buses[static_cast<std::size_t>(b)].id << ','
                << format_double(std::abs(v0)) << ',' << format_double(deg(v0)) << ','
                << format_double(std::abs(v1)) << ',' << format_double(deg(v1)) << '\n';
        }
        paths.voltages = path_of("voltages.csv");
        write_text_file(paths.voltages, csv.str());
    }

    {
        std::ostringstream csv;
        csv << "class,label,value,lower,upper\n";
        for (int d = 0; d < layout.size(); ++d) {
            const ControlDim& dim = layout.dims[static_cast<std::size_t>(d)];
            csv << control_class_name(dim.cls) << ',' << dim.label << ','
                << format_double(best.best_position[d]) << ',' << format_double(dim.lower)
                << ',' << format_double(dim.upper) << '\n';
        }
        paths.utilization = path_of("utilization.csv");
        write_text_file(paths.utilization, csv.str());
    }

    {
        json root;
        root["format"] = "scopf-controls";
        root["version"] = 1;
        root["case"] = doc.name;
        root["x"] = std::vector<double>(best.best_position.data(),
                                        best.best_position.data() + best.best_position.size());
        root["dims"] = json::array();
        for (int d = 0; d < layout.size(); ++d) {
            const ControlDim& dim = layout.dims[static_cast<std::size_t>(d)];
            json o;
            o["class"] = control_class_name(dim.cls);
            o["label"] = dim.label;
            o["lower"] = dim.lower;
            o["upper"] = dim.upper;
            o["integer"] = dim.integer;
            o["value"] = best.best_position[d];
            root["dims"].push_back(o);
        }
        root["taps"] = json::array();
        for (int p = 0; p < net.port_count(); ++p) {
            json o;
            o["port"] = p;
            o["label"] = net.ports[static_cast<std::size_t>(p)].label;
            o["voltage_step"] = controls.taps[static_cast<std::size_t>(p)].voltage_step;
            o["phase_step"] = controls.taps[static_cast<std::size_t>(p)].phase_step;
            root["taps"].push_back(o);
        }
        paths.controls = path_of("best_controls.json");
        write_text_file(paths.controls, root.dump(2) + "\n");
    }

    {
        const int scenario = doc.enable_in_phase_taps
                                 ? (doc.enable_quadrature_taps ? 3 : 2)
                                 : (doc.enable_quadrature_taps ? 0 : 1);
        json root;
        root["format"] = "scopf-summary";
        root["version"] = 1;
        root["case"] = doc.name;
        root["scenario"] = scenario;
        root["enable_in_phase_taps"] = doc.enable_in_phase_taps;
        root["enable_quadrature_taps"] = doc.enable_quadrature_taps;
        root["fitness"] = {{"best", result.best},
                           {"average", result.average},
                           {"worst", result.worst},
                           {"best_run", result.best_run}};
        root["runs"] = json::array();
        for (const RunResult& run : result.runs)
            root["runs"].push_back(json{{"seed", run.seed},
                                        {"best_fitness", run.best_fitness},
                                        {"iterations", run.iterations},
                                        {"wall_seconds", run.wall_seconds}});
        root["base"] = {{"objective", base_eval.objective_value},
                        {"loss_mw", problem.base_state().p_loss * net.base_mva},
                        {"feasible", base_eval.report.feasible}};
        root["best"] = {{"objective", eval.objective_value},
                        {"loss_mw", eval.state.p_loss * net.base_mva},
                        {"feasible", eval.report.feasible},
                        {"fitness", eval.fitness_value},
                        {"converged", eval.state.converged}};
        root["hyperparameters"] = {{"n_particles", hyper.n_particles},
                                   {"t_max", hyper.t_max},
                                   {"c1", hyper.c1},
                                   {"c2", hyper.c2},
                                   {"w_start", hyper.w_start},
                                   {"w_end", hyper.w_end},
                                   {"z_active_redispatch", hyper.z_active_redispatch},
                                   {"z_reactive_redispatch", hyper.z_reactive_redispatch},
                                   {"z_in_phase", hyper.z_in_phase},
                                   {"z_quadrature", hyper.z_quadrature},
                                   {"z_voltage", hyper.z_voltage},
                                   {"lambda", hyper.lambda},
                                   {"seed", hyper.seed},
                                   {"per_dimension_r", hyper.per_dimension_r},
                                   {"mutation_rate", hyper.mutation_rate},
                                   {"additive_mutation", hyper.additive_mutation},
                                   {"threads", hyper.threads}};
        paths.summary = path_of("summary.json");
        write_text_file(paths.summary, root.dump(2) + "\n");
    }

    return paths;
}

std::string to_json(const QcqpReport& report)
{
    json root;
    root["blocks"] = json::array();
    for (const BlockCheck& c : report.blocks)
        root["blocks"].push_back(
            json{{"block", c.block}, {"max_abs", c.max_abs}, {"index", c.index}});
    root["residual_max"] = report.residual_max;
    root["quartic_identity"] = {{"max_abs", report.quartic_identity.max_abs},
                                {"index", report.quartic_identity.index}};
    root["split_equivalence"] = {{"max_abs", report.split_equivalence.max_abs},
                                 {"index", report.split_equivalence.index}};
    root["worst"] = report.worst;
    root["pass"] = report.pass();
    return root.dump(2) + "\n";
}

}  // namespace scopf
