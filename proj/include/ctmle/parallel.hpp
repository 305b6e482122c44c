#pragma once

#include "ctmle/error.hpp"

#include <exception>
#include <omp.h>
#include <vector>

namespace ctmle {

/// Run body(v) for v = 0..V-1, in parallel unless already inside a parallel region.
/// Failures are collected per fold and the lowest-numbered one is rethrown as a
/// FoldError, so the outcome does not depend on scheduling.
template <class Body>
void for_each_fold(int V, Body body) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(V));
#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel() && V > 1)
    for (int v = 0; v < V; ++v) {
        try {
            body(v);
        } catch (...) {
            errors[static_cast<std::size_t>(v)] = std::current_exception();
        }
    }
    for (int v = 0; v < V; ++v) {
        if (!errors[static_cast<std::size_t>(v)]) continue;
        try {
            std::rethrow_exception(errors[static_cast<std::size_t>(v)]);
        } catch (const FoldError&) {
            throw;
        } catch (const std::exception& e) {
            throw FoldError(v, e.what());
        }
    }
}

}  // namespace ctmle
