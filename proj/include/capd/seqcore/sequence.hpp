#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capd/error.hpp"
#include "capd/rng.hpp"
#include "capd/seqcore/alphabet.hpp"

namespace capd::seq {

inline constexpr std::size_t kDefaultCanvasLength = 56;

/// A fixed-length canvas of token indices (residues, del, absorb).
struct TokenSequence {
    std::vector<Token> tokens;

    TokenSequence() = default;
    explicit TokenSequence(std::vector<Token> t) : tokens(std::move(t)) {}
    TokenSequence(std::size_t length, Token fill) : tokens(length, fill) {}

    std::size_t canvas_length() const { return tokens.size(); }
    Token operator[](std::size_t i) const { return tokens[i]; }
    Token& operator[](std::size_t i) { return tokens[i]; }
    std::span<const Token> view() const { return tokens; }

    bool is_clean(const Alphabet& a) const {
        for (Token t : tokens)
            if (t == a.absorb_token()) return false;
        return true;
    }

    bool operator==(const TokenSequence&) const = default;
};

inline std::string to_symbols(const TokenSequence& ts, const Alphabet& a = Alphabet::protein()) {
    std::string out;
    out.reserve(ts.canvas_length());
    for (Token t : ts.tokens) out.push_back(a.symbol(t));
    return out;
}

/// Parses a canvas written with alphabet symbols, including '-' and '#'.
inline TokenSequence from_symbols(std::string_view s, const Alphabet& a = Alphabet::protein()) {
    TokenSequence ts;
    ts.tokens.reserve(s.size());
    for (char c : s) ts.tokens.push_back(a.index(c));
    return ts;
}

inline void check_residues(std::string_view seq, const Alphabet& a) {
    for (char c : seq)
        if (!a.is_residue(c)) throw DataError(std::string("unknown residue character '") + c + "'");
}

/// Places the residues of `seq` in order on a canvas and fills the remaining
/// slots with del tokens. The residue slots form a uniformly random subset of
/// the canvas.
inline TokenSequence encode(std::string_view seq, std::size_t canvas_length, Rng& rng,
                            const Alphabet& a = Alphabet::protein()) {
    if (seq.size() > canvas_length)
        throw DataError("sequence exceeds canvas (" + std::to_string(seq.size()) + " > " +
                        std::to_string(canvas_length) + ")");
    check_residues(seq, a);

    TokenSequence ts(canvas_length, a.del_token());
    std::size_t placed = 0;
    for (std::size_t slot = 0; slot < canvas_length && placed < seq.size(); ++slot) {
        const std::size_t remaining_slots = canvas_length - slot;
        const std::size_t remaining_residues = seq.size() - placed;
        if (rng.below(remaining_slots) < remaining_residues) {
            ts[slot] = a.index(seq[placed]);
            ++placed;
        }
    }
    return ts;
}

/// Strips del tokens. An all-del canvas decodes to the empty string.
inline std::string decode(const TokenSequence& ts, const Alphabet& a = Alphabet::protein()) {
    std::string out;
    for (Token t : ts.tokens) {
        if (t == a.absorb_token()) throw DataError("sequence not fully denoised");
        if (t == a.del_token()) continue;
        out.push_back(a.symbol(t));
    }
    return out;
}

}  // namespace capd::seq
