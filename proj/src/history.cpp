#include "tdslab/history.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tdslab {

namespace {

real lerp(real t0, real v0, real t1, real v1, real t) {
    if (t <= t0) return v0;
    if (t >= t1) return v1;
    const real w = (t - t0) / (t1 - t0);
    return v0 + (v1 - v0) * w;
}

const char* kind_name(SegmentKind k) {
    switch (k) {
        case SegmentKind::constant: return "const";
        case SegmentKind::linear: return "linear";
        case SegmentKind::samples: return "samples";
    }
    return "?";
}

void validate_segment(const Segment& s) {
    if (!std::isfinite(s.t_start) || !std::isfinite(s.t_end) || !(s.t_start < s.t_end))
        throw std::invalid_argument("HistoryFn: segment must have finite t_start < t_end");
    for (real v : s.values)
        if (!std::isfinite(v)) throw std::invalid_argument("HistoryFn: non-finite segment value");
    switch (s.kind) {
        case SegmentKind::constant:
            if (s.values.size() != 1) throw std::invalid_argument("HistoryFn: const segment needs one value");
            break;
        case SegmentKind::linear:
            if (s.values.size() != 2) throw std::invalid_argument("HistoryFn: linear segment needs two values");
            break;
        case SegmentKind::samples:
            if (s.times.size() < 2 || s.times.size() != s.values.size())
                throw std::invalid_argument("HistoryFn: samples segment needs n >= 2 (t, v) pairs");
            if (s.times.front() != s.t_start || s.times.back() != s.t_end)
                throw std::invalid_argument("HistoryFn: samples must start at t_start and end at t_end");
            for (size_t i = 1; i < s.times.size(); ++i)
                if (!(s.times[i - 1] < s.times[i]))
                    throw std::invalid_argument("HistoryFn: sample times must be strictly increasing");
            break;
    }
}

}  // namespace

real Segment::value_at_start() const { return kind == SegmentKind::samples ? values.front() : values.front(); }

real Segment::value_at_end() const { return values.back(); }

real Segment::eval(real t) const {
    switch (kind) {
        case SegmentKind::constant: return values[0];
        case SegmentKind::linear: return lerp(t_start, values[0], t_end, values[1], t);
        case SegmentKind::samples: {
            auto it = std::upper_bound(times.begin(), times.end(), t);
            if (it == times.begin()) return values.front();
            if (it == times.end()) return values.back();
            const auto i = static_cast<size_t>(it - times.begin());
            return lerp(times[i - 1], values[i - 1], times[i], values[i], t);
        }
    }
    return 0;
}

HistoryFn::HistoryFn(std::vector<Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw std::invalid_argument("HistoryFn: no segments");
    for (size_t i = 0; i < segments_.size(); ++i) {
        validate_segment(segments_[i]);
        if (i == 0) continue;
        const Segment& a = segments_[i - 1];
        const Segment& b = segments_[i];
        if (a.t_end != b.t_start) throw std::invalid_argument("HistoryFn: segments must tile the domain");
        if (std::fabs(a.value_at_end() - b.value_at_start()) > kContinuityTol)
            throw std::invalid_argument("HistoryFn: discontinuity at t = " + format_real(b.t_start));
    }
}

HistoryFn HistoryFn::constant(real v, real t_start, real t_end) {
    return HistoryFn({Segment{t_start, t_end, SegmentKind::constant, {}, {v}}});
}

HistoryFn HistoryFn::from_knots(std::span<const Knot1> knots) {
    if (knots.size() < 2) throw std::invalid_argument("HistoryFn::from_knots: need at least two nodes");
    std::vector<Segment> segs;
    segs.reserve(knots.size() - 1);
    for (size_t i = 1; i < knots.size(); ++i) {
        const Knot1& a = knots[i - 1];
        const Knot1& b = knots[i];
        if (a.v == b.v)
            segs.push_back({a.t, b.t, SegmentKind::constant, {}, {a.v}});
        else
            segs.push_back({a.t, b.t, SegmentKind::linear, {}, {a.v, b.v}});
    }
    return HistoryFn(std::move(segs));
}

real HistoryFn::eval(real t) const {
    if (segments_.empty()) throw std::logic_error("HistoryFn::eval on empty function");
    if (!(t >= t_start() && t <= t_end()))
        throw std::domain_error("HistoryFn::eval: t = " + format_real(t) + " outside domain");
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](real x, const Segment& s) { return x < s.t_start; });
    const Segment& s = *(it == segments_.begin() ? it : std::prev(it));
    return s.eval(t);
}

std::vector<Knot1> HistoryFn::knots() const {
    std::vector<Knot1> out;
    auto push = [&out](real t, real v) {
        if (!out.empty() && out.back().t == t) return;
        out.push_back({t, v});
    };
    for (const Segment& s : segments_) {
        switch (s.kind) {
            case SegmentKind::constant:
                push(s.t_start, s.values[0]);
                push(s.t_end, s.values[0]);
                break;
            case SegmentKind::linear:
                push(s.t_start, s.values[0]);
                push(s.t_end, s.values[1]);
                break;
            case SegmentKind::samples:
                for (size_t i = 0; i < s.times.size(); ++i) push(s.times[i], s.values[i]);
                break;
        }
    }
    return out;
}

std::vector<real> HistoryFn::breakpoints() const {
    std::vector<real> out;
    for (const Knot1& k : knots())
        if (k.t > t_start() && k.t < t_end()) out.push_back(k.t);
    return out;
}

real HistoryFn::sup_norm() const {
    real m = 0;
    for (const Knot1& k : knots()) m = std::max(m, std::fabs(k.v));
    return m;
}

std::string HistoryFn::to_text() const {
    std::ostringstream os;
    for (const Segment& s : segments_) {
        os << kind_name(s.kind) << ' ' << format_real(s.t_start) << ' ' << format_real(s.t_end);
        if (s.kind == SegmentKind::samples) {
            os << ' ' << s.times.size();
            for (size_t i = 0; i < s.times.size(); ++i)
                os << ' ' << format_real(s.times[i]) << ' ' << format_real(s.values[i]);
        } else {
            for (real v : s.values) os << ' ' << format_real(v);
        }
        os << '\n';
    }
    return os.str();
}

HistoryFn HistoryFn::from_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::vector<Segment> segs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string w; ls >> w;) tok.push_back(w);
        if (tok.empty()) continue;
        auto fail = [&](const std::string& why) {
            throw std::invalid_argument("HistoryFn text line " + std::to_string(lineno) + ": " + why);
        };
        if (tok.size() < 4) fail("too few fields");
        Segment s;
        s.t_start = parse_real(tok[1]);
        s.t_end = parse_real(tok[2]);
        if (tok[0] == "const") {
            if (tok.size() != 4) fail("const takes one value");
            s.kind = SegmentKind::constant;
            s.values = {parse_real(tok[3])};
        } else if (tok[0] == "linear") {
            if (tok.size() != 5) fail("linear takes two values");
            s.kind = SegmentKind::linear;
            s.values = {parse_real(tok[3]), parse_real(tok[4])};
        } else if (tok[0] == "samples") {
            s.kind = SegmentKind::samples;
            const long n = std::strtol(tok[3].c_str(), nullptr, 10);
            if (n < 2 || tok.size() != static_cast<size_t>(4 + 2 * n)) fail("samples count mismatch");
            for (long i = 0; i < n; ++i) {
                s.times.push_back(parse_real(tok[4 + 2 * i]));
                s.values.push_back(parse_real(tok[5 + 2 * i]));
            }
        } else {
            fail("unknown segment kind '" + tok[0] + "'");
        }
        segs.push_back(std::move(s));
    }
    return HistoryFn(std::move(segs));
}

void HistoryFn::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_text();
}

HistoryFn HistoryFn::read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

bool HistoryFn::operator==(const HistoryFn& other) const {
    if (segments_.size() != other.segments_.size()) return false;
    for (size_t i = 0; i < segments_.size(); ++i) {
        const Segment& a = segments_[i];
        const Segment& b = other.segments_[i];
        if (a.kind != b.kind || a.t_start != b.t_start || a.t_end != b.t_end || a.times != b.times ||
            a.values != b.values)
            return false;
    }
    return true;
}

real stacked_sup_norm(std::span<const HistoryFn* const> channels) {
    if (channels.empty()) return 0;
    std::vector<real> times;
    for (const HistoryFn* h : channels) {
        if (h->t_start() != channels[0]->t_start() || h->t_end() != channels[0]->t_end())
            throw std::invalid_argument("stacked_sup_norm: channel domains differ");
        for (const Knot1& k : h->knots()) times.push_back(k.t);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    real best = 0;
    for (real t : times) {
        real s = 0;
        for (const HistoryFn* h : channels) {
            const real v = h->eval(t);
            s += v * v;
        }
        best = std::max(best, std::sqrt(s));
    }
    return best;
}

}  // namespace tdslab
