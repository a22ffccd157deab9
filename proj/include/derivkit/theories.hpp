#pragma once

#include "derivkit/kernel.hpp"

#include <string>
#include <vector>

namespace derivkit {

struct TheoryEntry {
    std::string name;
    DerivationScript script;
    std::vector<std::string> depends_on;
    std::string paper_anchor;
    bool reconstructed = false;
};

class CyclicDependency : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RegistryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// DERIVKIT_THEORY_DIR if set, else the directory baked in at build time.
std::string theory_dir();

// Reads registry.txt and each <name>.deriv from dir.
std::vector<TheoryEntry> registry(const std::string& dir = theory_dir());

std::string read_file(const std::string& path);

// Entries in an order where every dependency present in the list comes
// first; ties keep registry order.
std::vector<const TheoryEntry*> dependency_order(const std::vector<TheoryEntry>& entries);

// Checks entries in dependency order. Accepted theories become lemmas for
// later entries; an entry whose dependency was rejected is not checked.
std::vector<CheckReport> run_builtins(const std::vector<TheoryEntry>& entries);

}  // namespace derivkit
