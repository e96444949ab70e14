#include "vpmb/pmbm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace vpmb {

double PppIntensity::evaluate(const Eigen::VectorXd& x) const {
    double total = 0.0;
    for (const auto& t : terms)
        if (t.weight > 0.0) total += t.weight * pdf(t.density, x);
    return total;
}

double PppIntensity::total_weight() const {
    double total = 0.0;
    for (const auto& t : terms) total += t.weight;
    return total;
}

double GlobalHypothesis::weight() const { return std::exp(log_weight); }

std::size_t PmbmDensity::state_dim() const {
    for (const auto& t : ppp.terms) return static_cast<std::size_t>(t.density.dim());
    for (const auto& tr : tracks)
        for (const auto& l : tr.locals) return static_cast<std::size_t>(l.density.dim());
    return 0;
}

bool PmbmDensity::is_pmb() const {
    if (hypotheses.size() != 1) return false;
    return std::all_of(tracks.begin(), tracks.end(),
                       [](const Track& t) { return t.locals.size() == 1; });
}

double PmbmDensity::expected_cardinality() const {
    double total = ppp.total_weight();
    for (const auto& h : hypotheses) {
        double r = 0.0;
        for (std::size_t i = 0; i < tracks.size(); ++i)
            r += tracks[i].locals[h.locals_chosen[i]].existence;
        total += h.weight() * r;
    }
    return total;
}

void PmbmDensity::validate() const {
    if (hypotheses.empty()) throw ContractViolation("PMBM has no global hypotheses");
    double total = 0.0;
    for (const auto& h : hypotheses) {
        if (h.locals_chosen.size() != tracks.size())
            throw ContractViolation("hypothesis does not reference every track");
        for (std::size_t i = 0; i < tracks.size(); ++i)
            if (h.locals_chosen[i] >= tracks[i].locals.size())
                throw ContractViolation("hypothesis references a missing local hypothesis");
        total += h.weight();
    }
    if (std::abs(total - 1.0) > 1e-9) throw ContractViolation("hypothesis weights do not sum to 1");
    std::vector<std::size_t> ids;
    for (const auto& t : tracks) {
        if (t.locals.empty()) throw ContractViolation("track without local hypotheses");
        for (const auto& l : t.locals)
            if (!(l.existence >= 0.0 && l.existence <= 1.0))
                throw ContractViolation("existence probability outside [0, 1]");
        ids.push_back(t.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw ContractViolation("duplicate track id");
    for (const auto& t : ppp.terms)
        if (!(t.weight >= 0.0)) throw ContractViolation("negative PPP weight");
}

double bernoulli_kld_from_parts(double r_f, double r_q, double gaussian_term) {
    r_q = std::clamp(r_q, 0.0, 1.0);
    if ((r_q == 0.0 && r_f > 0.0) || (r_q == 1.0 && r_f < 1.0)) return kDivergenceCap;
    if (r_f == r_q && (r_f == 0.0 || r_f == 1.0)) return r_f * gaussian_term;
    double out = 0.0;
    if (r_f < 1.0) out += (1.0 - r_f) * std::log((1.0 - r_f) / (1.0 - r_q));
    if (r_f > 0.0) out += r_f * std::log(r_f / r_q) + r_f * gaussian_term;
    return out;
}

double bernoulli_kld(const BernoulliComponent& f, const BernoulliComponent& q) {
    const double g = f.existence > 0.0 ? gaussian_kld(f.density, q.density) : 0.0;
    return bernoulli_kld_from_parts(f.existence, q.existence, g);
}

double compute_phd(const PmbmDensity& d, const Eigen::VectorXd& x) {
    double total = d.ppp.evaluate(x);
    for (const auto& h : d.hypotheses) {
        const double w = h.weight();
        for (std::size_t i = 0; i < d.tracks.size(); ++i) {
            const auto& b = d.tracks[i].locals[h.locals_chosen[i]];
            if (b.existence > 0.0) total += w * b.existence * pdf(b.density, x);
        }
    }
    return total;
}

void normalise_weights(std::vector<GlobalHypothesis>& hypotheses) {
    if (hypotheses.empty()) return;
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& h : hypotheses) top = std::max(top, h.log_weight);
    if (!std::isfinite(top)) throw NumericalError("all hypothesis weights are zero");
    double sum = 0.0;
    for (const auto& h : hypotheses) sum += std::exp(h.log_weight - top);
    const double log_norm = top + std::log(sum);
    for (auto& h : hypotheses) h.log_weight -= log_norm;
}

void merge_duplicate_hypotheses(std::vector<GlobalHypothesis>& hypotheses) {
    std::map<std::vector<std::size_t>, std::size_t> seen;
    std::vector<GlobalHypothesis> merged;
    merged.reserve(hypotheses.size());
    for (auto& h : hypotheses) {
        auto [it, inserted] = seen.emplace(h.locals_chosen, merged.size());
        if (inserted) {
            merged.push_back(std::move(h));
        } else {
            double& lw = merged[it->second].log_weight;
            const double hi = std::max(lw, h.log_weight);
            if (std::isfinite(hi))
                lw = hi + std::log(std::exp(lw - hi) + std::exp(h.log_weight - hi));
        }
    }
    hypotheses = std::move(merged);
}

void compact(PmbmDensity& d) {
    std::vector<Track> kept_tracks;
    std::vector<std::vector<std::size_t>> new_chosen(d.hypotheses.size());

    for (std::size_t i = 0; i < d.tracks.size(); ++i) {
        const auto& locals = d.tracks[i].locals;
        std::vector<char> used(locals.size(), 0);
        for (const auto& h : d.hypotheses) used[h.locals_chosen[i]] = 1;

        // Remap: referenced locals in original order; every r = 0 local onto the first one.
        std::vector<std::size_t> remap(locals.size(), 0);
        Track out{d.tracks[i].id, {}};
        std::size_t null_index = std::numeric_limits<std::size_t>::max();
        bool any_alive = false;
        for (std::size_t l = 0; l < locals.size(); ++l) {
            if (!used[l]) continue;
            if (locals[l].existence <= 0.0) {
                if (null_index == std::numeric_limits<std::size_t>::max()) {
                    null_index = out.locals.size();
                    out.locals.push_back(locals[l]);
                    out.locals.back().existence = 0.0;
                }
                remap[l] = null_index;
            } else {
                any_alive = true;
                remap[l] = out.locals.size();
                out.locals.push_back(locals[l]);
            }
        }
        if (!any_alive) continue;
        for (std::size_t a = 0; a < d.hypotheses.size(); ++a)
            new_chosen[a].push_back(remap[d.hypotheses[a].locals_chosen[i]]);
        kept_tracks.push_back(std::move(out));
    }

    d.tracks = std::move(kept_tracks);
    for (std::size_t a = 0; a < d.hypotheses.size(); ++a)
        d.hypotheses[a].locals_chosen = std::move(new_chosen[a]);
    merge_duplicate_hypotheses(d.hypotheses);
}

PmbmDensity prune_and_cap(const PmbmDensity& d, const PruneThresholds& t) {
    if (t.ppp_weight < 0.0 || t.existence < 0.0)
        throw ContractViolation("prune_and_cap: negative threshold");
    if (t.max_hypotheses == 0)
        throw ContractViolation("prune_and_cap: capping to zero hypotheses removes all of them");

    PmbmDensity out;
    out.next_track_id = d.next_track_id;
    for (const auto& term : d.ppp.terms)
        if (term.weight >= t.ppp_weight) out.ppp.terms.push_back(term);

    out.tracks = d.tracks;
    for (auto& tr : out.tracks)
        for (auto& l : tr.locals)
            if (l.existence < t.existence) l.existence = 0.0;

    std::vector<std::size_t> order(d.hypotheses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return d.hypotheses[a].log_weight > d.hypotheses[b].log_weight;
    });
    order.resize(std::min(order.size(), t.max_hypotheses));
    std::sort(order.begin(), order.end());
    out.hypotheses.clear();
    for (std::size_t a : order) out.hypotheses.push_back(d.hypotheses[a]);
    if (out.hypotheses.empty()) throw ContractViolation("prune_and_cap: no hypotheses left");

    compact(out);
    normalise_weights(out.hypotheses);
    return out;
}

std::size_t best_hypothesis(const PmbmDensity& d) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < d.hypotheses.size(); ++a)
        if (d.hypotheses[a].log_weight > d.hypotheses[best].log_weight) best = a;
    return best;
}

std::vector<Eigen::VectorXd> estimate_targets(const PmbmDensity& d, double threshold) {
    std::vector<Eigen::VectorXd> out;
    if (d.tracks.empty() || d.hypotheses.empty()) return out;
    const auto& h = d.hypotheses[best_hypothesis(d)];
    for (std::size_t i = 0; i < d.tracks.size(); ++i) {
        const auto& b = d.tracks[i].locals[h.locals_chosen[i]];
        if (b.existence > threshold) out.push_back(b.density.mean);
    }
    return out;
}

// ---- text serialisation ----

namespace {

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
    os << "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v(i);
    os << " ]";
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    os << "[";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        os << " [";
        for (Eigen::Index c = 0; c < m.cols(); ++c) os << ' ' << m(r, c);
        os << " ]";
    }
    os << " ]";
}

void write_gaussian(std::ostream& os, const GaussianDensity& g) {
    os << "mean ";
    write_vector(os, g.mean);
    os << " cov ";
    write_matrix(os, g.cov);
}

class Reader {
public:
    explicit Reader(std::istream& is) : is_(is) {}

    std::string token() {
        std::string t;
        if (!(is_ >> t)) throw ContractViolation("read_pmbm: unexpected end of input");
        return t;
    }
    void expect(const std::string& key) {
        const std::string t = token();
        if (t != key) throw ContractViolation("read_pmbm: expected '" + key + "', got '" + t + "'");
    }
    double real() { return parse_real(token()); }
    std::size_t natural() {
        const std::string t = token();
        try {
            return static_cast<std::size_t>(std::stoull(t));
        } catch (const std::exception&) {
            throw ContractViolation("read_pmbm: bad natural '" + t + "'");
        }
    }
    std::vector<double> reals() {
        expect("[");
        return reals_body();
    }
    Eigen::VectorXd vector() {
        const auto v = reals();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    Eigen::MatrixXd matrix() {
        expect("[");
        std::vector<std::vector<double>> rows;
        for (std::string t = token(); t != "]"; t = token()) {
            if (t != "[") throw ContractViolation("read_pmbm: malformed matrix");
            rows.push_back(reals_body());
        }
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                          rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (static_cast<Eigen::Index>(rows[r].size()) != m.cols())
                throw ContractViolation("read_pmbm: ragged matrix");
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        return m;
    }
    GaussianDensity gaussian() {
        GaussianDensity g;
        expect("mean");
        g.mean = vector();
        expect("cov");
        g.cov = matrix();
        return g;
    }

private:
    // Reads reals up to the closing bracket; the opening one is already consumed.
    std::vector<double> reals_body() {
        std::vector<double> out;
        for (std::string t = token(); t != "]"; t = token()) out.push_back(parse_real(t));
        return out;
    }
    static double parse_real(const std::string& t) {
        if (t == "inf") return std::numeric_limits<double>::infinity();
        if (t == "-inf") return -std::numeric_limits<double>::infinity();
        try {
            return std::stod(t);
        } catch (const std::exception&) {
            throw ContractViolation("read_pmbm: bad real '" + t + "'");
        }
    }

    std::istream& is_;
};

}  // namespace

void write_pmbm(std::ostream& os, const PmbmDensity& d) {
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(17);
    os << "pmbm\n";
    os << "next_track_id " << d.next_track_id << '\n';
    os << "ppp " << d.ppp.terms.size() << '\n';
    for (const auto& t : d.ppp.terms) {
        os << "  term weight " << t.weight << ' ';
        write_gaussian(os, t.density);
        os << '\n';
    }
    os << "tracks " << d.tracks.size() << '\n';
    for (const auto& tr : d.tracks) {
        os << "  track id " << tr.id << " locals " << tr.locals.size() << '\n';
        for (const auto& l : tr.locals) {
            os << "    local existence " << l.existence << " assoc_weight_log "
               << l.assoc_weight_log << ' ';
            write_gaussian(os, l.density);
            os << '\n';
        }
    }
    os << "hypotheses " << d.hypotheses.size() << '\n';
    for (const auto& h : d.hypotheses) {
        os << "  hypothesis log_weight " << h.log_weight << " chosen [";
        for (auto c : h.locals_chosen) os << ' ' << c;
        os << " ]\n";
    }
    os << "end\n";
    os.flags(flags);
    os.precision(prec);
}

PmbmDensity read_pmbm(std::istream& is) {
    Reader r(is);
    PmbmDensity d;
    r.expect("pmbm");
    r.expect("next_track_id");
    d.next_track_id = r.natural();
    r.expect("ppp");
    const std::size_t n_terms = r.natural();
    for (std::size_t k = 0; k < n_terms; ++k) {
        r.expect("term");
        r.expect("weight");
        WeightedGaussian t;
        t.weight = r.real();
        t.density = r.gaussian();
        d.ppp.terms.push_back(std::move(t));
    }
    r.expect("tracks");
    const std::size_t n_tracks = r.natural();
    for (std::size_t k = 0; k < n_tracks; ++k) {
        Track tr;
        r.expect("track");
        r.expect("id");
        tr.id = r.natural();
        r.expect("locals");
        const std::size_t n_locals = r.natural();
        for (std::size_t l = 0; l < n_locals; ++l) {
            BernoulliComponent b;
            r.expect("local");
            r.expect("existence");
            b.existence = r.real();
            r.expect("assoc_weight_log");
            b.assoc_weight_log = r.real();
            b.density = r.gaussian();
            tr.locals.push_back(std::move(b));
        }
        d.tracks.push_back(std::move(tr));
    }
    r.expect("hypotheses");
    const std::size_t n_hyp = r.natural();
    d.hypotheses.clear();
    for (std::size_t k = 0; k < n_hyp; ++k) {
        GlobalHypothesis h;
        r.expect("hypothesis");
        r.expect("log_weight");
        h.log_weight = r.real();
        r.expect("chosen");
        for (double c : r.reals()) h.locals_chosen.push_back(static_cast<std::size_t>(c));
        d.hypotheses.push_back(std::move(h));
    }
    r.expect("end");
    return d;
}

}  // namespace vpmb
