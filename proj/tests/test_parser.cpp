#include "gen.hpp"

#include "derivkit/parser.hpp"
#include "derivkit/theories.hpp"

#include <doctest.h>

#include <sstream>

using namespace derivkit;

namespace {

const char* kNineLines =
    "theory langmuir_kinetic\n"
    "vars k_ad k_d P S A : Real\n"
    "hyp hreaction : r_ad = r_d\n"
    "hyp hS : S != 0\n"
    "hyp hk_d : k_d != 0\n"
    "let r_ad := k_ad * P * S\n"
    "let r_d := k_d * A\n"
    "goal k_d * A / S = k_ad * P\n"
    "proof rw hreaction <- unfold r_ad ring qed\n";

}  // namespace

TEST_SUITE("parser") {

TEST_CASE("minimal script") {
    auto s = parse_script("theory t\nvars x : Real\nhyp h : x = x\ngoal x = x\nproof ring qed");
    CHECK(s.name == "t");
    CHECK(s.hyps.size() == 1);
    CHECK(s.steps.size() == 1);
    CHECK(s.steps[0].kind == StepKind::Ring);
}

TEST_CASE("undeclared variable is reported at its line") {
    try {
        parse_script("theory t\nvars x : Real\nhyp h : x = x\ngoal x = z\nproof ring qed");
        FAIL("expected UndeclaredSymbol");
    } catch (const UndeclaredSymbol& e) {
        CHECK(e.name == "z");
        CHECK(e.line == 4);
    }
}

TEST_CASE("duplicate names") {
    CHECK_THROWS_AS(parse_script("theory t\nvars x x : Real\ngoal x = x\nproof ring qed"), DuplicateName);
    CHECK_THROWS_AS(parse_script("theory t\nvars x : Real\nhyp h : x = x\nhyp h : x = x\ngoal x = x\nproof ring qed"),
                    DuplicateName);
}

TEST_CASE("syntax errors carry a position") {
    try {
        parse_script("theory t\nvars x : Real\ngoal x = = x\nproof ring qed");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.line == 3);
        CHECK(e.col > 0);
    }
}

TEST_CASE("comments are ignored") {
    auto a = parse_script("-- lead\ntheory t -- name\nvars x : Real\ngoal x = x -- trailing\nproof ring qed");
    auto b = parse_script("theory t\nvars x : Real\ngoal x = x\nproof ring qed");
    CHECK(equal(a, b));
}

TEST_CASE("nine line kinetic script") {
    auto s = parse_script(kNineLines);
    CHECK(s.hyps.size() == 3);
    CHECK(s.lets.size() == 2);
    CHECK(s.goal);
    REQUIRE(s.steps.size() == 3);
    CHECK(s.steps[0].kind == StepKind::Rewrite);
    CHECK(s.steps[0].reverse);
    CHECK(s.steps[1].kind == StepKind::Unfold);
}

TEST_CASE("printing") {
    auto s = parse_script(print_script(parse_script("theory t\nvars x : Real\ngoal x = x\nproof ring qed")));
    CHECK(print_script(s).find("hyp") == std::string::npos);

    auto lang = registry(theory_dir());
    for (const auto& e : lang)
        if (e.name == "langmuir_kinetic_let") CHECK(to_string(e.script.goal) == "theta = K * P / (1 + K * P)");
}

TEST_CASE("builtin theories round-trip") {
    auto entries = registry(theory_dir());
    REQUIRE(entries.size() == 20);
    for (const auto& e : entries) {
        std::string text = print_script(e.script);
        auto again = parse_script(text);
        CHECK_MESSAGE(equal(again, e.script), e.name);
        CHECK(print_script(again) == text);
    }
}

TEST_CASE("random scripts round-trip") {
    std::mt19937_64 rng(314);
    int parsed = 0;
    for (int id = 0; id < 100; ++id) {
        std::string text = gen::random_script(rng, id);
        DerivationScript s;
        INFO(text);
        REQUIRE_NOTHROW(s = parse_script(text));
        ++parsed;
        CHECK_MESSAGE(equal(parse_script(print_script(s)), s), text);
    }
    CHECK(parsed == 100);
}

TEST_CASE("token deletion errors point at or before the deletion") {
    auto entries = registry(theory_dir());
    int errors = 0, exempt = 0;
    for (const auto& e : entries) {
        std::string text = read_file(theory_dir() + "/" + e.name + ".deriv");
        std::vector<std::string> lines;
        std::istringstream in(text);
        for (std::string l; std::getline(in, l);) lines.push_back(l);
        for (std::size_t li = 0; li < lines.size(); ++li) {
            if (lines[li].rfind("--", 0) == 0) continue;
            std::vector<std::string> toks;
            std::istringstream ls(lines[li]);
            for (std::string t; ls >> t;) toks.push_back(t);
            for (std::size_t ti = 0; ti < toks.size(); ++ti) {
                std::string line;
                for (std::size_t k = 0; k < toks.size(); ++k)
                    if (k != ti) line += (line.empty() ? "" : " ") + toks[k];
                std::string mutated;
                for (std::size_t k = 0; k < lines.size(); ++k) mutated += (k == li ? line : lines[k]) + "\n";
                try {
                    parse_script(mutated);
                } catch (const UndeclaredSymbol& u) {
                    // deleting a declaration surfaces at the first use
                    if (u.name == toks[ti]) {
                        ++exempt;
                        continue;
                    }
                    ++errors;
                    CHECK_MESSAGE(u.line <= int(li) + 1, e.name, " deleted '", toks[ti], "' at line ", li + 1);
                } catch (const ParseError& p) {
                    ++errors;
                    CHECK_MESSAGE(p.line <= int(li) + 1, e.name, " deleted '", toks[ti], "' at line ", li + 1, ": ",
                                  std::string(p.what()));
                }
            }
        }
    }
    CHECK(errors > 500);
    MESSAGE("deletion errors: ", errors, ", declaration deletions: ", exempt);
}

}
