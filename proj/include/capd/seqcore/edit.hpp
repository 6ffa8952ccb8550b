#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

namespace capd::seq {

/// Unit-cost Levenshtein distance.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({sub, up + 1, row[j - 1] + 1});
            diag = up;
        }
    }
    return row[b.size()];
}

/// Levenshtein distance capped at `limit + 1`. Only the diagonal band of
/// half-width `limit` is evaluated, so the cost is O(len * limit).
inline std::size_t edit_distance_bounded(std::string_view a, std::string_view b, std::size_t limit) {
    const std::size_t over = limit + 1;
    const std::size_t n = a.size(), m = b.size();
    if ((n > m ? n - m : m - n) > limit) return over;
    std::vector<std::size_t> prev(m + 1, over), cur(m + 1, over);
    for (std::size_t j = 0; j <= std::min(m, limit); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t lo = i > limit ? i - limit : 0;
        const std::size_t hi = std::min(m, i + limit);
        std::fill(cur.begin(), cur.end(), over);
        std::size_t row_min = over;
        if (lo == 0) {
            cur[0] = i;
            row_min = i;
        }
        for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) {
            std::size_t v = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            v = std::min(v, prev[j] + 1);
            v = std::min(v, cur[j - 1] + 1);
            cur[j] = std::min(v, over);
            row_min = std::min(row_min, cur[j]);
        }
        if (row_min > limit) return over;
        std::swap(prev, cur);
    }
    return std::min(prev[m], over);
}

enum class EditOp : char { match = '=', substitute = 'X', insert = 'I', remove = 'D' };

/// One minimal-cost alignment of `variant` against `reference`, as an edit
/// script read left to right. Insert consumes a variant residue, remove a
/// reference residue. Ties prefer substitution/match, then insertion, and
/// indels are pushed as far left as the optimum allows.
inline std::vector<EditOp> align(std::string_view variant, std::string_view reference) {
    const std::size_t n = reference.size(), m = variant.size();
    std::vector<std::size_t> dp((n + 1) * (m + 1));
    auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dp[i * (m + 1) + j]; };
    for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
    for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            at(i, j) = std::min({at(i - 1, j - 1) + (reference[i - 1] == variant[j - 1] ? 0 : 1),
                                 at(i, j - 1) + 1, at(i - 1, j) + 1});

    // Walking back from the end and taking the diagonal whenever it is optimal
    // defers indels to the earliest columns.
    std::vector<EditOp> ops;
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0) {
            const bool same = reference[i - 1] == variant[j - 1];
            if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
                ops.push_back(same ? EditOp::match : EditOp::substitute);
                --i;
                --j;
                continue;
            }
        }
        if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
            ops.push_back(EditOp::insert);
            --j;
        } else {
            ops.push_back(EditOp::remove);
            --i;
        }
    }
    std::reverse(ops.begin(), ops.end());
    return ops;
}

/// Lengths of maximal runs of consecutive inserted residues in the
/// alignment of `variant` against `wt`, in left-to-right order.
inline std::vector<std::size_t> insertion_run_lengths(std::string_view variant, std::string_view wt) {
    std::vector<std::size_t> runs;
    std::size_t run = 0;
    for (EditOp op : align(variant, wt)) {
        if (op == EditOp::insert) {
            ++run;
        } else if (run > 0) {
            runs.push_back(run);
            run = 0;
        }
    }
    if (run > 0) runs.push_back(run);
    return runs;
}

}  // namespace capd::seq
