#pragma once

#include "derivkit/logic.hpp"

#include <string>
#include <vector>

namespace derivkit {

struct Decl {
    enum class Kind { Vars, Fns, Const } kind;
    std::vector<std::string> names;
    std::string sort;  // "Real", "State", "State->Real", "Real->Real"
    bool operator==(const Decl& o) const = default;
};

struct LetDef {
    std::string name;
    Expr body;
};

enum class StepKind {
    Rewrite,
    Unfold,
    FieldNormalize,
    Ring,
    Intro,
    Specialize,
    Use,
    Apply,
    SeriesGeom,
    SeriesGeomWeighted,
    IndexShift,
    DerivRule,
    Antideriv,
    AntiderivConst,
    LimitWitness,
};

struct ProofStep {
    StepKind kind;
    std::string name;                // hypothesis, definition, lemma or rule id
    bool reverse = false;            // rw h <-
    std::vector<std::string> names;  // intro
    std::vector<Expr> terms;         // specialize terms, use witness
    long count = 0;                  // limit_witness
    int line = 0;
};

struct DerivationScript {
    std::string name;
    std::vector<Decl> decls;
    std::vector<Hypothesis> hyps;
    std::vector<LetDef> lets;
    Formula goal;
    std::vector<ProofStep> steps;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line, int col)
        : std::runtime_error(msg), line(line), col(col) {}
    int line, col;
};

class SyntaxError : public ParseError {
public:
    SyntaxError(int line, int col, const std::string& expected)
        : ParseError(std::to_string(line) + ":" + std::to_string(col) + ": syntax error, expected " + expected,
                     line, col),
          expected(expected) {}
    std::string expected;
};

class DuplicateName : public ParseError {
public:
    DuplicateName(const std::string& name, int line, int col)
        : ParseError(std::to_string(line) + ":" + std::to_string(col) + ": duplicate name " + name, line, col),
          name(name) {}
    std::string name;
};

class UndeclaredSymbol : public ParseError {
public:
    UndeclaredSymbol(const std::string& name, int line, int col)
        : ParseError(std::to_string(line) + ":" + std::to_string(col) + ": undeclared symbol " + name, line,
                     col),
          name(name) {}
    std::string name;
};

DerivationScript parse_script(const std::string& text);
std::string print_script(const DerivationScript& s);
std::string to_string(const ProofStep& step);

// structural equality (source positions ignored)
bool equal(const DerivationScript& a, const DerivationScript& b);

// Builds the checking context: declared symbols, lets, hypotheses, and the
// two state constants when a state sort is in use.
Context make_context(const DerivationScript& s);

}  // namespace derivkit
