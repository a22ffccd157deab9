#include "derivkit/cli.hpp"

#include "derivkit/theories.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <thread>

namespace derivkit {

using nlohmann::json;

json to_json(const RunResult& r) {
    const CheckReport& c = r.report;
    json j;
    j["theory"] = c.theory;
    j["verdict"] = c.accepted ? "accepted" : "failed";
    j["soundness"] = c.soundness == Soundness::NumericCertified ? "numeric_certified" : "symbolic";
    if (!c.accepted && c.failure) j["failure"] = {{"step", c.failure->step}, {"reason", c.failure->reason}};
    j["steps"] = json::array();
    for (const auto& s : c.steps) {
        json obs = json::array();
        for (const auto& o : s.obligations) obs.push_back(o.obligation);
        j["steps"].push_back({{"step", s.step}, {"goal_after", s.goal_after}, {"obligations", obs}});
    }
    if (r.numeric)
        j["numeric"] = {{"seed", r.numeric->seed},
                        {"samples", r.numeric->samples},
                        {"worst_residual", r.numeric->worst_residual}};
    j["ms"] = c.ms;
    return j;
}

RunResult run_result_from_json(const json& j) {
    RunResult r;
    CheckReport& c = r.report;
    c.theory = j.at("theory").get<std::string>();
    c.accepted = j.at("verdict").get<std::string>() == "accepted";
    c.soundness = j.at("soundness").get<std::string>() == "numeric_certified" ? Soundness::NumericCertified
                                                                               : Soundness::Symbolic;
    if (j.contains("failure")) {
        const auto& f = j.at("failure");
        std::string reason = f.at("reason").get<std::string>();
        auto kind = reason.rfind("ObligationFailed", 0) == 0 ? Failure::Kind::ObligationFailed
                    : reason.rfind("GoalNotClosed", 0) == 0  ? Failure::Kind::GoalNotClosed
                                                             : Failure::Kind::StepFailed;
        c.failure = Failure{kind, f.at("step").get<int>(), reason, ""};
    }
    for (const auto& s : j.at("steps")) {
        StepRecord rec;
        rec.step = s.at("step").get<std::string>();
        rec.goal_after = s.at("goal_after").get<std::string>();
        for (const auto& o : s.at("obligations")) rec.obligations.push_back({o.get<std::string>(), {}});
        c.steps.push_back(std::move(rec));
    }
    if (j.contains("numeric")) {
        NumericSummary n;
        n.seed = j["numeric"].at("seed").get<std::uint64_t>();
        n.samples = j["numeric"].at("samples").get<long>();
        n.worst_residual = j["numeric"].at("worst_residual").get<double>();
        r.numeric = n;
    }
    c.ms = j.at("ms").get<long>();
    return r;
}

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs fn(i) for i in [0, n) on up to jobs threads. Results are stored by
// index, so output order never depends on completion order.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, unsigned jobs, F fn) {
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned count = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < count; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

long elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return static_cast<long>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count());
}

struct Options {
    bool json = false;
    bool numeric = false;
    unsigned jobs = 1;
    SamplePlan plan;
};

void print_failure(std::ostream& out, const CheckReport& r) {
    if (r.failure && !r.failure->goal.empty()) out << "    goal: " << r.failure->goal << "\n";
}

void print_numeric(std::ostream& out, const NumericSummary& n, bool verbose) {
    for (const auto& note : n.notes) out << "    " << note << "\n";
    for (const auto& c : n.checks) {
        out << "    " << c.routine << ": " << (c.pass ? "pass" : "FAIL") << " (" << c.samples
            << " samples, worst residual " << c.worst_residual << ")\n";
        if (verbose || !c.pass)
            for (const auto& l : c.log) out << "      " << l << "\n";
    }
}

// Starvation or a diverging series counts as a failed numeric check.
NumericSummary numeric_or_failure(const DerivationScript& s, const SamplePlan& plan) {
    try {
        return run_numeric(s, plan);
    } catch (const RejectionStarvation& e) {
        NumericSummary n;
        n.seed = plan.seed;
        n.pass = false;
        n.notes.push_back(std::string("RejectionStarvation: ") + e.what());
        return n;
    } catch (const NonConvergent& e) {
        NumericSummary n;
        n.seed = plan.seed;
        n.pass = false;
        n.notes.push_back(std::string("NonConvergent: ") + e.what());
        return n;
    }
}

// Builtin lemmas, computed only when a user script applies one.
LemmaStore builtin_lemmas() {
    LemmaStore store;
    auto entries = registry();
    for (const auto& r : run_builtins(entries))
        if (r.accepted)
            for (const auto& e : entries)
                if (e.name == r.theory) store[e.name] = e.script;
    return store;
}

int cmd_check(const std::vector<std::string>& paths, const Options& o, std::ostream& out) {
    std::vector<std::string> texts;
    for (const auto& p : paths) {
        if (!std::filesystem::is_regular_file(p)) throw UsageError("cannot read " + p);
        texts.push_back(read_file(p));
    }
    std::vector<std::optional<DerivationScript>> scripts(texts.size());
    std::vector<std::string> parse_errors(texts.size());
    bool wants_lemmas = false;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        try {
            scripts[i] = parse_script(texts[i]);
            for (const auto& st : scripts[i]->steps)
                if (st.kind == StepKind::Apply) wants_lemmas = true;
        } catch (const ParseError& e) {
            parse_errors[i] = e.what();
        }
    }
    LemmaStore lemmas;
    if (wants_lemmas) {
        try {
            lemmas = builtin_lemmas();
        } catch (const RegistryError&) {
            // no builtin corpus: apply steps fail on their own
        }
    }

    auto results = parallel_map<RunResult>(texts.size(), o.jobs, [&](std::size_t i) {
        RunResult r;
        if (!scripts[i]) {
            r.report.theory = std::filesystem::path(paths[i]).stem().string();
            r.report.failure = Failure{Failure::Kind::StepFailed, 0, "ParseError: " + parse_errors[i], ""};
            return r;
        }
        auto t0 = std::chrono::steady_clock::now();
        r.report = check(*scripts[i], lemmas);
        if (o.numeric && r.report.accepted) r.numeric = numeric_or_failure(*scripts[i], o.plan);
        r.report.ms = elapsed_ms(t0);
        return r;
    });

    bool all_ok = true;
    json arr = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        bool ok = r.report.accepted && (!r.numeric || r.numeric->pass);
        all_ok = all_ok && ok;
        if (o.json) {
            arr.push_back(to_json(r));
            continue;
        }
        if (!scripts[i]) {
            out << paths[i] << ": " << parse_errors[i] << "\n";
            continue;
        }
        out << r.report.theory << ": " << r.report.verdict_line() << "\n";
        print_failure(out, r.report);
        if (r.numeric) print_numeric(out, *r.numeric, false);
    }
    if (o.json) out << arr.dump(2) << "\n";
    return all_ok ? 0 : 1;
}

int cmd_builtin(bool all, const std::string& name, const Options& o, std::ostream& out) {
    auto entries = registry();
    if (!all) {
        // the entry plus everything it depends on
        std::set<std::string> keep;
        std::function<void(const std::string&)> need = [&](const std::string& n) {
            if (!keep.insert(n).second) return;
            for (const auto& e : entries)
                if (e.name == n)
                    for (const auto& d : e.depends_on) need(d);
        };
        bool found = std::any_of(entries.begin(), entries.end(), [&](const TheoryEntry& e) { return e.name == name; });
        if (!found) throw UsageError("no builtin theory named " + name);
        need(name);
        std::vector<TheoryEntry> subset;
        for (const auto& e : entries)
            if (keep.count(e.name)) subset.push_back(e);
        entries = std::move(subset);
    }

    auto t0 = std::chrono::steady_clock::now();
    auto reports = run_builtins(entries);
    std::map<std::string, const DerivationScript*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e.script;

    std::vector<RunResult> results(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) results[i].report = reports[i];
    auto numeric = parallel_map<std::optional<NumericSummary>>(reports.size(), o.jobs, [&](std::size_t i) {
        std::optional<NumericSummary> n;
        auto t = std::chrono::steady_clock::now();
        if (reports[i].accepted) n = numeric_or_failure(*by_name.at(reports[i].theory), o.plan);
        results[i].report.ms += elapsed_ms(t);
        return n;
    });
    for (std::size_t i = 0; i < results.size(); ++i) results[i].numeric = numeric[i];

    std::vector<const RunResult*> shown;
    for (const auto& r : results)
        if (all || r.report.theory == name) shown.push_back(&r);

    int accepted = 0, numeric_ok = 0;
    for (const auto* r : shown) {
        if (r->report.accepted) ++accepted;
        if (r->numeric && r->numeric->pass) ++numeric_ok;
    }
    bool ok = accepted == static_cast<int>(shown.size()) && numeric_ok == accepted;

    if (o.json) {
        json arr = json::array();
        for (const auto* r : shown) arr.push_back(to_json(*r));
        out << arr.dump(2) << "\n";
        return ok ? 0 : 1;
    }
    std::size_t width = 0;
    for (const auto* r : shown) width = std::max(width, r->report.theory.size());
    for (const auto* r : shown) {
        out << std::left << std::setw(static_cast<int>(width) + 2) << r->report.theory << r->report.verdict_line();
        if (r->numeric)
            out << "  numeric " << (r->numeric->pass ? "pass" : "FAIL") << " (" << r->numeric->samples
                << " samples, worst residual " << r->numeric->worst_residual << ")";
        out << "  " << r->report.ms << " ms\n";
        if (!r->report.accepted) print_failure(out, r->report);
        bool certified = r->report.soundness == Soundness::NumericCertified;
        if (certified) {
            for (const auto& st : r->report.steps)
                for (const auto& n : st.notes) out << "    " << n << "\n";
        }
        if (r->numeric) print_numeric(out, *r->numeric, !all || certified);
    }
    out << accepted << "/" << shown.size() << " accepted, " << numeric_ok << "/" << accepted
        << " numeric checks passed (seed " << o.plan.seed << ", " << elapsed_ms(t0) << " ms)\n";
    return ok ? 0 : 1;
}

int cmd_list(std::ostream& out) {
    for (const auto& e : registry()) {
        out << e.name << "  depends: ";
        for (std::size_t i = 0; i < e.depends_on.size(); ++i) out << (i ? ", " : "") << e.depends_on[i];
        if (e.depends_on.empty()) out << "-";
        if (e.reconstructed) out << "  [reconstructed]";
        out << "  (" << e.paper_anchor << ")\n";
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"derivkit: hypothesis-gated derivation checker", "derivkit"};
    app.require_subcommand(1);
    Options o;
    long samples = 100;
    auto add_common = [&](CLI::App* sub) {
        sub->add_flag("--json", o.json, "machine-readable report array");
        sub->add_option("--seed", o.plan.seed, "random seed for the numeric oracle");
        sub->add_option("--samples", samples, "samples per numeric check");
        sub->add_option("--tol", o.plan.rel_tol, "relative tolerance");
        sub->add_option("--series-cutoff", o.plan.series_cutoff, "terms summed when evaluating a series");
        sub->add_option("--jobs", o.jobs, "parallel workers")->check(CLI::PositiveNumber);
    };

    std::vector<std::string> paths;
    auto* check_cmd = app.add_subcommand("check", "check derivation scripts");
    check_cmd->add_option("paths", paths, "script files")->required();
    check_cmd->add_flag("--numeric", o.numeric, "also run the numeric oracle on accepted scripts");
    add_common(check_cmd);

    bool all = false;
    std::string name;
    auto* builtin_cmd = app.add_subcommand("builtin", "check the builtin theories and run their numeric checks");
    auto* all_opt = builtin_cmd->add_flag("--all", all, "every registry entry");
    builtin_cmd->add_option("name", name, "one registry entry")->excludes(all_opt);
    add_common(builtin_cmd);

    auto* list_cmd = app.add_subcommand("list", "list the builtin theories");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        o.plan.samples = samples;
        if (*list_cmd) return cmd_list(out);
        validate(o.plan);
        if (*check_cmd) return cmd_check(paths, o, out);
        if (!all && name.empty()) throw UsageError("builtin needs --all or a theory name");
        return cmd_builtin(all, name, o, out);
    } catch (const UsageError& e) {
        err << "derivkit: " << e.what() << "\n";
    } catch (const InvalidPlan& e) {
        err << "derivkit: invalid sampling plan: " << e.what() << "\n";
    } catch (const RegistryError& e) {
        err << "derivkit: " << e.what() << "\n";
    } catch (const ParseError& e) {
        err << "derivkit: " << e.what() << "\n";
    } catch (const CyclicDependency& e) {
        err << "derivkit: " << e.what() << "\n";
    }
    return 2;
}

}  // namespace derivkit
