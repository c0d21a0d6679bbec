#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hgad {

enum class VariableKind { Continuous, Discrete };

std::string to_string(VariableKind kind);
VariableKind variable_kind_from_string(const std::string& s);

/// Ordered list of the L monitored variables. Index order is the canonical
/// node order everywhere downstream (windows, graphs, scores, reports).
struct VariableSchema {
    struct Entry {
        std::string name;
        VariableKind kind;
    };

    std::vector<Entry> entries;

    std::size_t size() const { return entries.size(); }
    const Entry& operator[](std::size_t i) const { return entries[i]; }

    /// Unique names, L >= 2. `require_both_kinds` additionally demands at
    /// least one continuous and one discrete variable (the full heterogeneous
    /// pipeline); degenerate schemas are allowed where documented.
    void validate(bool require_both_kinds = false) const;

    std::vector<std::size_t> indices_of(VariableKind kind) const;
    bool has_kind(VariableKind kind) const;
    /// Index of a named variable, or throws DataError.
    std::size_t index_of(const std::string& name) const;

    bool operator==(const VariableSchema& other) const;

    static VariableSchema load(const std::string& path);
    void save(const std::string& path) const;
};

}  // namespace hgad
