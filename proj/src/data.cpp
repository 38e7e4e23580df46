#include "delayid/data.hpp"

#include "delayid/errors.hpp"
#include "delayid/format.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace delayid {

double Trajectory::lookup_start() const {
    if (dense) return dense->t_min();
    if (!history_times.empty()) return history_times.front();
    return times.empty() ? 0.0 : times.front();
}

double Trajectory::lookup_end() const {
    if (dense) return dense->t_end();
    return times.empty() ? 0.0 : times.back();
}

void validate(const Trajectory& traj) {
    const auto m = static_cast<Eigen::Index>(traj.times.size());
    if (m == 0) throw ParameterError("trajectory has no samples");
    if (traj.states.rows() != m) throw DimensionError("trajectory states/times size mismatch");
    for (Eigen::Index i = 1; i < m; ++i)
        if (!(traj.times[i] > traj.times[i - 1])) throw ParameterError("trajectory times must be strictly ascending");
    if (!traj.states.allFinite()) throw ParameterError("trajectory states must be finite");
    if (traj.derivs) {
        if (traj.derivs->rows() != m || traj.derivs->cols() != traj.states.cols())
            throw DimensionError("trajectory derivatives do not match states");
        if (!traj.derivs->allFinite()) throw ParameterError("trajectory derivatives must be finite");
    }
    if (traj.input && traj.input->size() != m) throw DimensionError("trajectory input length mismatch");
    const auto h = static_cast<Eigen::Index>(traj.history_times.size());
    if (traj.history_states.rows() != h || (h > 0 && traj.history_states.cols() != traj.states.cols()))
        throw DimensionError("trajectory history grid shape mismatch");
    for (Eigen::Index i = 0; i < h; ++i) {
        if (i > 0 && !(traj.history_times[i] > traj.history_times[i - 1]))
            throw ParameterError("history grid times must be strictly ascending");
        if (!(traj.history_times[i] < traj.times.front()))
            throw ParameterError("history grid must precede the samples");
    }
}

namespace {

// Linear interpolation on history grid + samples without materialising the concatenation.
class LinearLookup {
public:
    explicit LinearLookup(const Trajectory& traj) : traj_(traj), nh_(traj.history_times.size()) {}

    double time(std::size_t i) const { return i < nh_ ? traj_.history_times[i] : traj_.times[i - nh_]; }
    auto row(std::size_t i) const {
        return i < nh_ ? traj_.history_states.row(static_cast<Eigen::Index>(i))
                       : traj_.states.row(static_cast<Eigen::Index>(i - nh_));
    }
    std::size_t size() const { return nh_ + traj_.times.size(); }

    Vec at(double t) const {
        const std::size_t n = size();
        const double lo = time(0), hi = time(n - 1);
        const double slack = 1e-10 * std::max(1.0, std::abs(hi - lo));
        if (t < lo - slack || t > hi + slack) {
            std::ostringstream os;
            os << "lookup at t=" << t << " outside recorded range [" << lo << ", " << hi << "]";
            throw DomainError(os.str());
        }
        if (n == 1) return row(0).transpose();
        // first index with time > t
        std::size_t a = 0, b = n;
        while (a < b) {
            const std::size_t mid = (a + b) / 2;
            if (time(mid) > t) b = mid; else a = mid + 1;
        }
        std::size_t j = std::clamp<std::size_t>(a, 1, n - 1);
        const std::size_t i = j - 1;
        const double ti = time(i), tj = time(j);
        if (t <= ti) return row(i).transpose();
        if (t >= tj) return row(j).transpose();
        const double w = (t - ti) / (tj - ti);
        return ((1.0 - w) * row(i) + w * row(j)).transpose();
    }

private:
    const Trajectory& traj_;
    std::size_t nh_;
};

}  // namespace

Vec lookup_state(const Trajectory& traj, double t) {
    if (traj.dense) return traj.dense->value(t);
    return LinearLookup(traj).at(t);
}

Mat delayed_states(const Trajectory& traj, double tau) {
    if (tau < 0.0) throw ParameterError("delay must be non-negative");
    if (tau == 0.0) return traj.states;
    const auto m = static_cast<Eigen::Index>(traj.times.size());
    Mat out(m, traj.states.cols());
    if (traj.dense) {
        for (Eigen::Index i = 0; i < m; ++i) out.row(i) = traj.dense->value(traj.times[i] - tau).transpose();
        return out;
    }
    const LinearLookup lookup(traj);
    for (Eigen::Index i = 0; i < m; ++i) out.row(i) = lookup.at(traj.times[i] - tau).transpose();
    return out;
}

Mat central_difference(const std::vector<double>& times, const Mat& states) {
    const std::size_t m = times.size();
    if (m < 2) throw ParameterError("central difference needs at least two samples");
    const double dt = (times.back() - times.front()) / static_cast<double>(m - 1);
    for (std::size_t i = 1; i < m; ++i)
        if (std::abs((times[i] - times[i - 1]) - dt) > 1e-9 * std::max(1.0, dt))
            throw UnsupportedError("central difference requires uniformly spaced samples");
    Mat d(states.rows(), states.cols());
    const auto last = static_cast<Eigen::Index>(m - 1);
    d.row(0) = (states.row(1) - states.row(0)) / dt;
    d.row(last) = (states.row(last) - states.row(last - 1)) / dt;
    for (Eigen::Index i = 1; i < last; ++i) d.row(i) = (states.row(i + 1) - states.row(i - 1)) / (2.0 * dt);
    return d;
}

double SplitSpec::split_time() const {
    return boundary ? *boundary : t_start + train_fraction * (t_end - t_start);
}

namespace {

std::vector<double> linspace(double a, double b, std::size_t m) {
    std::vector<double> t(m);
    if (m == 1) {
        t[0] = a;
        return t;
    }
    for (std::size_t i = 0; i < m; ++i)
        t[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(m - 1);
    t.back() = b;
    return t;
}

std::vector<double> random_times(double a, double b, std::size_t m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(a, b);
    std::vector<double> t;
    t.reserve(m);
    while (t.size() < m) {
        t.push_back(dist(rng));
        if (t.size() == m) {
            std::sort(t.begin(), t.end());
            t.erase(std::unique(t.begin(), t.end()), t.end());
        }
    }
    return t;
}

Trajectory make_set(const DenseSolution& sol, const DdeSystem* sys, const std::vector<double>& times) {
    Trajectory tr;
    tr.times = times;
    const auto m = static_cast<Eigen::Index>(times.size());
    tr.states.resize(m, sol.dim());
    for (Eigen::Index i = 0; i < m; ++i) tr.states.row(i) = sol.value(times[i]).transpose();
    if (sys && sys->input) {
        Vec u(m);
        for (Eigen::Index i = 0; i < m; ++i) u[i] = sys->input(times[i]);
        tr.input = std::move(u);
    }
    return tr;
}

Mat exact_derivatives(const DenseSolution& sol, const DdeSystem& sys, const std::vector<double>& times) {
    Mat d(static_cast<Eigen::Index>(times.size()), sys.n);
    std::vector<Vec> delayed(sys.delays.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        for (std::size_t j = 0; j < sys.delays.size(); ++j) delayed[j] = sol.value(t - sys.delays[j]);
        d.row(static_cast<Eigen::Index>(i)) = sys(t, sol.value(t), delayed).transpose();
    }
    return d;
}

}  // namespace

std::pair<Trajectory, Trajectory> sample_trajectory(const DenseSolution& sol, const DdeSystem* sys,
                                                    const SplitSpec& spec, DerivMode mode) {
    if (!(spec.t_end > spec.t_start)) throw ParameterError("sampling window must have positive length");
    const double split = spec.split_time();
    if (!(split > spec.t_start && split < spec.t_end)) throw ParameterError("train/test boundary outside window");
    if (spec.t_start < sol.t0() - 1e-12 || spec.t_end > sol.t_end() + 1e-9)
        throw DomainError("sampling window outside the solution span");
    if (spec.m < 2) throw ParameterError("need at least two samples");
    if (mode == DerivMode::exact_rhs && sys == nullptr)
        throw ParameterError("exact_rhs derivatives need the generating system");
    if (mode == DerivMode::central_difference && spec.sampling != SamplingKind::uniform)
        throw UnsupportedError("central difference requires uniform sampling");

    std::mt19937_64 rng(spec.seed);
    std::vector<double> train_t, test_t;
    if (spec.m_train) {
        const std::size_t mtr = *spec.m_train;
        if (mtr < 1 || mtr >= spec.m) throw ParameterError("m_train must be in [1, m)");
        const std::size_t mts = spec.m - mtr;
        if (spec.sampling == SamplingKind::uniform) {
            train_t = linspace(spec.t_start, split, mtr);
            const double dt = (spec.t_end - split) / static_cast<double>(mts);
            for (std::size_t i = 1; i <= mts; ++i) test_t.push_back(split + dt * static_cast<double>(i));
            test_t.back() = spec.t_end;
        } else {
            train_t = random_times(spec.t_start, split, mtr, rng);
            test_t = random_times(split, spec.t_end, mts, rng);
        }
    } else {
        const std::vector<double> all = spec.sampling == SamplingKind::uniform
                                            ? linspace(spec.t_start, spec.t_end, spec.m)
                                            : random_times(spec.t_start, spec.t_end, spec.m, rng);
        for (double t : all) (t <= split ? train_t : test_t).push_back(t);
    }
    if (train_t.empty() || test_t.empty()) throw ParameterError("split leaves an empty train or test set");

    Trajectory train = make_set(sol, sys, train_t);
    Trajectory test = make_set(sol, sys, test_t);

    if (mode == DerivMode::exact_rhs) {
        train.derivs = exact_derivatives(sol, *sys, train_t);
        test.derivs = exact_derivatives(sol, *sys, test_t);
    } else if (mode == DerivMode::central_difference) {
        std::vector<double> all = train_t;
        all.insert(all.end(), test_t.begin(), test_t.end());
        Mat states(train.states.rows() + test.states.rows(), sol.dim());
        states << train.states, test.states;
        const Mat d = central_difference(all, states);
        train.derivs = d.topRows(train.states.rows());
        test.derivs = d.bottomRows(test.states.rows());
    }

    // Pre-window history on the spacing of the first two training samples.
    if (spec.history_span > 0.0) {
        const double dt = spec.sampling == SamplingKind::uniform && train_t.size() > 1
                              ? train_t[1] - train_t[0]
                              : std::min(spec.history_span / 20.0, (split - spec.t_start) / static_cast<double>(spec.m));
        const auto steps = static_cast<std::size_t>(std::ceil(spec.history_span / dt - 1e-9));
        for (std::size_t i = steps; i >= 1; --i) train.history_times.push_back(spec.t_start - dt * static_cast<double>(i));
        if (train.history_times.front() < sol.t_min()) train.history_times.front() = sol.t_min();
        train.history_states.resize(static_cast<Eigen::Index>(train.history_times.size()), sol.dim());
        for (std::size_t i = 0; i < train.history_times.size(); ++i)
            train.history_states.row(static_cast<Eigen::Index>(i)) = sol.value(train.history_times[i]).transpose();
    } else {
        train.history_states.resize(0, sol.dim());
    }
    // The test set's history is everything recorded before it.
    test.history_times = train.history_times;
    test.history_times.insert(test.history_times.end(), train_t.begin(), train_t.end());
    test.history_states.resize(static_cast<Eigen::Index>(test.history_times.size()), sol.dim());
    test.history_states << train.history_states, train.states;

    train.window_start = spec.t_start;
    test.window_start = split;
    train.seed = test.seed = spec.seed;
    train.label = "train";
    test.label = "test";
    if (spec.dense_lookup) {
        auto shared = std::make_shared<const DenseSolution>(sol);
        train.dense = shared;
        test.dense = shared;
    }
    validate(train);
    validate(test);
    return {std::move(train), std::move(test)};
}

double rmse(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("rmse: shape mismatch");
    if (a.size() == 0) return 0.0;
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const int n = traj.dim();
    os << "# t0=" << format_double(traj.times.front()) << '\n';
    if (!traj.label.empty()) os << "# label=" << traj.label << '\n';
    os << "# seed=" << traj.seed << '\n';
    os << 't';
    for (int j = 1; j <= n; ++j) os << ",x" << j;
    if (traj.derivs)
        for (int j = 1; j <= n; ++j) os << ",dx" << j;
    if (traj.input) os << ",u";
    os << '\n';
    auto write_row = [&](double t, auto&& x, const Eigen::Index* sample) {
        os << format_double(t);
        for (int j = 0; j < n; ++j) os << ',' << format_double(x(j));
        if (traj.derivs)
            for (int j = 0; j < n; ++j) os << ',' << (sample ? format_double((*traj.derivs)(*sample, j)) : "nan");
        if (traj.input) os << ',' << (sample ? format_double((*traj.input)[*sample]) : "nan");
        os << '\n';
    };
    for (std::size_t i = 0; i < traj.history_times.size(); ++i)
        write_row(traj.history_times[i], traj.history_states.row(static_cast<Eigen::Index>(i)), nullptr);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        write_row(traj.times[i], traj.states.row(r), &r);
    }
}

Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    std::optional<double> t0;
    Trajectory tr;
    std::vector<std::string> header;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            const std::string val = line.substr(eq + 1);
            if (key == "t0") t0 = parse_double(val);
            else if (key == "label") tr.label = val;
            else if (key == "seed") tr.seed = std::stoull(val);
            continue;
        }
        header = split_csv(line);
        break;
    }
    if (header.empty() || header[0] != "t") throw ParameterError("trajectory CSV: missing header starting with 't'");
    int n = 0, nd = 0;
    bool has_u = false;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const auto& h = header[i];
        if (h == "u") has_u = true;
        else if (h.rfind("dx", 0) == 0) ++nd;
        else if (h.rfind('x', 0) == 0) ++n;
        else throw ParameterError("trajectory CSV: unknown column '" + h + "'");
    }
    if (n == 0 || (nd != 0 && nd != n)) throw ParameterError("trajectory CSV: inconsistent state/derivative columns");
    std::vector<double> times, htimes;
    std::vector<std::vector<double>> xs, dxs, hxs;
    std::vector<double> us;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_csv(line);
        if (f.size() != header.size()) {
            std::ostringstream os;
            os << "trajectory CSV line " << line_no << ": expected " << header.size() << " fields";
            throw ParameterError(os.str());
        }
        const double t = parse_double(f[0]);
        std::vector<double> x(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(j)] = parse_double(f[1 + static_cast<std::size_t>(j)]);
        if (t0 && t < *t0) {
            htimes.push_back(t);
            hxs.push_back(std::move(x));
            continue;
        }
        times.push_back(t);
        xs.push_back(std::move(x));
        if (nd) {
            std::vector<double> d(static_cast<std::size_t>(n));
            for (int j = 0; j < n; ++j) d[static_cast<std::size_t>(j)] = parse_double(f[1 + static_cast<std::size_t>(n + j)]);
            dxs.push_back(std::move(d));
        }
        if (has_u) us.push_back(parse_double(f.back()));
    }
    auto to_mat = [n](const std::vector<std::vector<double>>& rows) {
        Mat m(static_cast<Eigen::Index>(rows.size()), n);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
        return m;
    };
    tr.times = std::move(times);
    tr.states = to_mat(xs);
    if (nd) tr.derivs = to_mat(dxs);
    if (has_u) tr.input = Eigen::Map<const Vec>(us.data(), static_cast<Eigen::Index>(us.size()));
    tr.history_times = std::move(htimes);
    tr.history_states = to_mat(hxs);
    if (!tr.times.empty()) tr.window_start = tr.times.front();
    validate(tr);
    return tr;
}

}  // namespace delayid
