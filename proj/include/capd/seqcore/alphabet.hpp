#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

#include "capd/error.hpp"

namespace capd::seq {

using Token = std::uint8_t;

/// Token set of the diffusion chain.
///
/// Indices are laid out as [residues..., del, absorb]: the first `data_size()`
/// indices are emittable tokens, the last index is the absorbing noise state.
/// The canonical protein alphabet has 20 residues; smaller residue sets are
/// accepted for toy chains used in exhaustive tests.
class Alphabet {
public:
    static constexpr char kDelSymbol = '-';
    static constexpr char kAbsorbSymbol = '#';
    static constexpr std::string_view kCanonicalResidues = "ACDEFGHIKLMNPQRSTVWY";

    Alphabet() : Alphabet(kCanonicalResidues) {}

    explicit Alphabet(std::string_view residues) : residues_(residues) {
        if (residues_.empty()) throw ConfigError("alphabet needs at least one residue");
        if (residues_.size() > 64) throw ConfigError("alphabet too large");
        lookup_.fill(kInvalid);
        for (std::size_t i = 0; i < residues_.size(); ++i) {
            const char c = residues_[i];
            if (!std::isupper(static_cast<unsigned char>(c)))
                throw ConfigError(std::string("alphabet residue must be an uppercase letter: '") + c + "'");
            if (lookup_[static_cast<unsigned char>(c)] != kInvalid)
                throw ConfigError(std::string("duplicate alphabet residue '") + c + "'");
            lookup_[static_cast<unsigned char>(c)] = static_cast<Token>(i);
        }
        lookup_[static_cast<unsigned char>(kDelSymbol)] = del_token();
        lookup_[static_cast<unsigned char>(kAbsorbSymbol)] = absorb_token();
    }

    static const Alphabet& protein() {
        static const Alphabet a;
        return a;
    }

    std::size_t residue_count() const { return residues_.size(); }
    /// Residues plus del.
    std::size_t data_size() const { return residues_.size() + 1; }
    /// Data tokens plus the absorbing state.
    std::size_t total_size() const { return residues_.size() + 2; }

    Token del_token() const { return static_cast<Token>(residues_.size()); }
    Token absorb_token() const { return static_cast<Token>(residues_.size() + 1); }

    const std::string& residues() const { return residues_; }

    bool is_residue(char c) const {
        const Token t = lookup_[static_cast<unsigned char>(c)];
        return t != kInvalid && t < residues_.size();
    }
    bool is_residue_token(Token t) const { return t < residues_.size(); }

    /// Maps any alphabet symbol (residue, del or absorb) to its index.
    Token index(char c) const {
        const Token t = lookup_[static_cast<unsigned char>(c)];
        if (t == kInvalid) throw DataError(std::string("unknown residue character '") + c + "'");
        return t;
    }

    char symbol(Token t) const {
        if (t < residues_.size()) return residues_[t];
        if (t == del_token()) return kDelSymbol;
        if (t == absorb_token()) return kAbsorbSymbol;
        throw DataError("token index out of range: " + std::to_string(t));
    }

    bool operator==(const Alphabet& o) const { return residues_ == o.residues_; }

private:
    static constexpr Token kInvalid = 0xff;
    std::string residues_;
    std::array<Token, 256> lookup_{};
};

}  // namespace capd::seq
