#include "derivkit/theories.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#ifndef DERIVKIT_DEFAULT_THEORY_DIR
#define DERIVKIT_DEFAULT_THEORY_DIR "theories"
#endif

namespace derivkit {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

}  // namespace

std::string theory_dir() {
    if (const char* env = std::getenv("DERIVKIT_THEORY_DIR"); env && *env) return env;
    return DERIVKIT_DEFAULT_THEORY_DIR;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RegistryError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<TheoryEntry> registry(const std::string& dir) {
    std::vector<TheoryEntry> out;
    std::istringstream lines(read_file(dir + "/registry.txt"));
    std::string line;
    while (std::getline(lines, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto cols = split(line, '|');
        if (cols.size() != 4) throw RegistryError("malformed registry line: " + line);
        TheoryEntry e;
        e.name = cols[0];
        for (const auto& d : split(cols[1], ','))
            if (!d.empty()) e.depends_on.push_back(d);
        e.reconstructed = cols[2] == "yes";
        e.paper_anchor = cols[3];
        e.script = parse_script(read_file(dir + "/" + e.name + ".deriv"));
        if (e.script.name != e.name) throw RegistryError(e.name + ".deriv declares theory " + e.script.name);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<const TheoryEntry*> dependency_order(const std::vector<TheoryEntry>& entries) {
    std::map<std::string, const TheoryEntry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;
    std::map<std::string, int> state;  // 0 new, 1 visiting, 2 done
    std::vector<const TheoryEntry*> order;
    std::function<void(const TheoryEntry*)> visit = [&](const TheoryEntry* e) {
        int& s = state[e->name];
        if (s == 2) return;
        if (s == 1) throw CyclicDependency("dependency cycle through " + e->name);
        s = 1;
        for (const auto& d : e->depends_on) {
            auto it = by_name.find(d);
            if (it != by_name.end()) visit(it->second);
        }
        state[e->name] = 2;
        order.push_back(e);
    };
    for (const auto& e : entries) visit(&e);
    return order;
}

std::vector<CheckReport> run_builtins(const std::vector<TheoryEntry>& entries) {
    std::vector<CheckReport> reports;
    LemmaStore lemmas;
    std::map<std::string, bool> verdict;
    for (const TheoryEntry* e : dependency_order(entries)) {
        std::string blocked;
        for (const auto& d : e->depends_on) {
            auto it = verdict.find(d);
            if (it != verdict.end() && !it->second) blocked = d;
        }
        if (!blocked.empty()) {
            CheckReport r;
            r.theory = e->name;
            r.failure = Failure{Failure::Kind::StepFailed, 0, "StepFailed: dependency " + blocked + " was not accepted",
                                display(e->script.goal)};
            verdict[e->name] = false;
            reports.push_back(std::move(r));
            continue;
        }
        CheckReport r = check(e->script, lemmas);
        verdict[e->name] = r.accepted;
        if (r.accepted) lemmas[e->name] = e->script;
        reports.push_back(std::move(r));
    }
    return reports;
}

}  // namespace derivkit
