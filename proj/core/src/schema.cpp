#include "hgad/schema.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "hgad/error.hpp"

namespace hgad {

std::string to_string(VariableKind kind) {
    return kind == VariableKind::Continuous ? "continuous" : "discrete";
}

VariableKind variable_kind_from_string(const std::string& s) {
    if (s == "continuous" || s == "C" || s == "c") return VariableKind::Continuous;
    if (s == "discrete" || s == "D" || s == "d") return VariableKind::Discrete;
    throw DataError("unknown variable kind '" + s + "' (expected continuous|discrete)");
}

void VariableSchema::validate(bool require_both_kinds) const {
    if (entries.size() < 2) {
        throw DataError("schema needs at least 2 variables, got " +
                        std::to_string(entries.size()));
    }
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        if (e.name.empty()) throw DataError("schema contains an empty variable name");
        if (!seen.insert(e.name).second) {
            throw DataError("duplicate variable name '" + e.name + "' in schema");
        }
    }
    if (require_both_kinds &&
        (!has_kind(VariableKind::Continuous) || !has_kind(VariableKind::Discrete))) {
        throw DataError(
            "heterogeneous pipeline needs at least one continuous and one discrete variable");
    }
}

std::vector<std::size_t> VariableSchema::indices_of(VariableKind kind) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].kind == kind) out.push_back(i);
    }
    return out;
}

bool VariableSchema::has_kind(VariableKind kind) const {
    for (const auto& e : entries) {
        if (e.kind == kind) return true;
    }
    return false;
}

std::size_t VariableSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].name == name) return i;
    }
    throw DataError("variable '" + name + "' not in schema");
}

bool VariableSchema::operator==(const VariableSchema& other) const {
    if (entries.size() != other.entries.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].name != other.entries[i].name ||
            entries[i].kind != other.entries[i].kind) {
            return false;
        }
    }
    return true;
}

VariableSchema VariableSchema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("schema file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.contains("variables") || !j["variables"].is_array()) {
        throw DataError("schema file " + path + " missing 'variables' array");
    }
    VariableSchema schema;
    for (const auto& v : j["variables"]) {
        schema.entries.push_back(
            {v.at("name").get<std::string>(),
             variable_kind_from_string(v.at("kind").get<std::string>())});
    }
    schema.validate();
    return schema;
}

void VariableSchema::save(const std::string& path) const {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& e : entries) {
        vars.push_back({{"name", e.name}, {"kind", to_string(e.kind)}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write schema file: " + path);
    out << nlohmann::json{{"variables", vars}}.dump(2) << "\n";
}

}  // namespace hgad
