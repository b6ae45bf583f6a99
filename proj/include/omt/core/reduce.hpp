#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "omt/core/parallel.hpp"
#include "omt/core/tensor.hpp"

namespace omt {

/// Summation block size. Terms inside a block are added sequentially; block
/// partials are then combined pairwise in a fixed binary tree, which keeps the
/// rounding pattern independent of how work is distributed.
inline constexpr std::size_t reduce_block = 1024;

namespace detail {

template <typename T>
TensorT<T> combine_pairwise(std::vector<TensorT<T>> partials) {
    if (partials.empty()) throw std::invalid_argument("reduce: empty sequence");
    while (partials.size() > 1) {
        std::vector<TensorT<T>> next;
        next.reserve((partials.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < partials.size(); i += 2) {
            partials[i] += partials[i + 1];
            next.push_back(std::move(partials[i]));
        }
        if (partials.size() % 2 == 1) next.push_back(std::move(partials.back()));
        partials = std::move(next);
    }
    return std::move(partials[0]);
}

} // namespace detail

/// Deterministic blocked-pairwise sum of `count` terms produced on demand by
/// `term(i, acc)` which adds term i into acc. Blocks of `reduce_block`
/// consecutive terms are summed sequentially (possibly on different workers),
/// then combined pairwise in index order. Output is bit-identical for any
/// worker count.
template <typename T, typename TermFn>
TensorT<T> reduce_sum_terms(std::size_t count, const std::vector<std::size_t>& shape,
                            TermFn&& term) {
    if (count == 0) throw std::invalid_argument("reduce_sum: empty sequence");
    std::size_t nblocks = (count + reduce_block - 1) / reduce_block;
    std::vector<TensorT<T>> partials(nblocks);
    parallel_blocks(nblocks, [&](std::size_t blo, std::size_t bhi) {
        for (std::size_t b = blo; b < bhi; ++b) {
            TensorT<T> acc(shape);
            std::size_t lo = b * reduce_block;
            std::size_t hi = std::min(count, lo + reduce_block);
            for (std::size_t i = lo; i < hi; ++i) term(i, acc);
            partials[b] = std::move(acc);
        }
    });
    return detail::combine_pairwise(std::move(partials));
}

/// Deterministic sum of a materialized chunk sequence (all chunks same shape).
template <typename T>
TensorT<T> reduce_sum(const std::vector<TensorT<T>>& chunks) {
    if (chunks.empty()) throw std::invalid_argument("reduce_sum: empty sequence");
    for (const auto& c : chunks) chunks[0].require_same_shape(c);
    return reduce_sum_terms<T>(chunks.size(), chunks[0].shape(),
                               [&](std::size_t i, TensorT<T>& acc) { acc += chunks[i]; });
}

} // namespace omt
