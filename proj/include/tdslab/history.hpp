#pragma once

#include "tdslab/real.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tdslab {

enum class SegmentKind { constant, linear, samples };

/// One piece of a history function. Every kind is piecewise linear in t:
///   constant: values = {v}
///   linear:   values = {v_start, v_end}
///   samples:  times/values hold n >= 2 nodes with times.front() == t_start,
///             times.back() == t_end, strictly increasing; linear in between.
struct Segment {
    real t_start = 0;
    real t_end = 0;
    SegmentKind kind = SegmentKind::constant;
    std::vector<real> times;
    std::vector<real> values;

    real value_at_start() const;
    real value_at_end() const;
    real eval(real t) const;
};

struct Knot1 {
    real t;
    real v;
};

/// Continuous scalar function on a closed interval, tiled by segments.
/// Initial data of the delay system lives on [-2, 0].
class HistoryFn {
public:
    static constexpr real kContinuityTol = 1e-12L;

    HistoryFn() = default;
    /// Validates tiling and continuity; throws std::invalid_argument.
    explicit HistoryFn(std::vector<Segment> segments);

    static HistoryFn constant(real v, real t_start = -2, real t_end = 0);
    /// Piecewise-linear interpolant through the given nodes, one linear
    /// segment per consecutive pair.
    static HistoryFn from_knots(std::span<const Knot1> knots);

    real t_start() const { return segments_.front().t_start; }
    real t_end() const { return segments_.back().t_end; }
    bool empty() const { return segments_.empty(); }
    const std::vector<Segment>& segments() const { return segments_; }

    /// Throws std::domain_error outside [t_start, t_end].
    real eval(real t) const;
    /// Exact sup |h(t)|, attained at a node.
    real sup_norm() const;
    /// All nodes of the piecewise-linear representation, in order, deduplicated.
    std::vector<Knot1> knots() const;
    /// Node times strictly inside the domain (kinks of the function).
    std::vector<real> breakpoints() const;

    std::string to_text() const;
    static HistoryFn from_text(std::string_view text);
    void write_file(const std::filesystem::path& path) const;
    static HistoryFn read_file(const std::filesystem::path& path);

    bool operator==(const HistoryFn& other) const;

private:
    std::vector<Segment> segments_;
};

/// sup over t of the Euclidean norm of the stacked channels. All channels
/// must share a domain; the sup of a convex function along each common linear
/// piece sits at a node, so evaluating on the union of nodes is exact.
real stacked_sup_norm(std::span<const HistoryFn* const> channels);

}  // namespace tdslab
