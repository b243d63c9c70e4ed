#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace bmt {

/// Exactly rounded accumulation of doubles (Shewchuk's expansion algorithm,
/// the scheme behind Python's math.fsum).
///
/// The returned value is the true real-arithmetic sum rounded once, so it
/// depends only on the multiset of terms and not on the order they were
/// added. Expectations computed this way make permutation identities
/// (e.g. matching pushforward moments of permuted atoms) hold bitwise.
class ExactSum {
public:
    void add(double x) {
        std::size_t used = 0;
        for (std::size_t i = 0; i < partials_.size(); ++i) {
            double y = partials_[i];
            if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials_[used++] = lo;
            x = hi;
        }
        partials_.resize(used);
        partials_.push_back(x);
    }

    /// Correctly rounded value of everything added so far.
    double value() const {
        std::size_t n = partials_.size();
        if (n == 0) return 0.0;
        double hi = partials_[--n];
        double lo = 0.0;
        while (n > 0) {
            const double x = hi;
            const double y = partials_[--n];
            hi = x + y;
            const double yr = hi - x;
            lo = y - yr;
            if (lo != 0.0) break;
        }
        // Half-even correction when the discarded tail all points one way.
        if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                      (lo > 0.0 && partials_[n - 1] > 0.0))) {
            const double y = lo * 2.0;
            const double x = hi + y;
            if (y == x - hi) hi = x;
        }
        return hi;
    }

    void reset() { partials_.clear(); }

private:
    std::vector<double> partials_;  // nonoverlapping, increasing magnitude
};

}  // namespace bmt
