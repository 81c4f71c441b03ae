#include "dcppo/serialize.hpp"

#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dcppo {

using nlohmann::json;

namespace {

json mat_flat(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    out.reserve(m.size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return json(out);
}

Eigen::MatrixXd mat_unflat(const json& j, Eigen::Index rows, Eigen::Index cols) {
    auto v = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        throw std::invalid_argument("matrix payload has wrong length");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[k++];
    return m;
}

json vec_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_unjson(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mats_json(const std::vector<Eigen::MatrixXd>& ms) {
    json arr = json::array();
    for (const auto& m : ms) arr.push_back(mat_flat(m));
    return arr;
}

json vecs_json(const std::vector<Eigen::VectorXd>& vs) {
    json arr = json::array();
    for (const auto& v : vs) arr.push_back(vec_json(v));
    return arr;
}

void check_schema(const json& j, const char* type) {
    if (j.value("schema_version", -1) != kSchemaVersion)
        throw std::invalid_argument(std::string(type) + ": unsupported schema_version");
    if (j.value("type", "") != type)
        throw std::invalid_argument(std::string("expected payload of type ") + type);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

json to_json(const TabularLinearMdp& mdp) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["type"] = "tabular_linear_mdp";
    j["S"] = mdp.S;
    j["A"] = mdp.A;
    j["H"] = mdp.H;
    j["d"] = mdp.d;
    j["s_init"] = mdp.s_init;
    j["s_abs"] = mdp.s_abs;
    j["a_anchor"] = mdp.a_anchor;
    j["feature_mode"] = to_string(mdp.feature_mode);
    j["seed"] = mdp.seed;
    j["phi"] = mat_flat(mdp.phi);
    j["P"] = mats_json(mdp.P);
    j["w"] = vecs_json(mdp.w);
    return j;
}

TabularLinearMdp mdp_from_json(const json& j) {
    check_schema(j, "tabular_linear_mdp");
    TabularLinearMdp mdp;
    mdp.S = j.at("S").get<int>();
    mdp.A = j.at("A").get<int>();
    mdp.H = j.at("H").get<int>();
    mdp.d = j.at("d").get<int>();
    mdp.s_init = j.at("s_init").get<int>();
    mdp.s_abs = j.at("s_abs").get<int>();
    mdp.a_anchor = j.at("a_anchor").get<int>();
    mdp.feature_mode = feature_mode_from_string(j.at("feature_mode").get<std::string>());
    mdp.seed = j.at("seed").get<std::uint64_t>();
    mdp.phi = mat_unflat(j.at("phi"), static_cast<Eigen::Index>(mdp.S) * mdp.A, mdp.d);
    for (const auto& pj : j.at("P"))
        mdp.P.push_back(mat_unflat(pj, static_cast<Eigen::Index>(mdp.S) * mdp.A, mdp.S));
    for (const auto& wj : j.at("w")) mdp.w.push_back(vec_unjson(wj));
    mdp.validate();
    return mdp;
}

json to_json(const BehaviorModel& bm, int S, int A) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["type"] = "behavior_model";
    j["S"] = S;
    j["A"] = A;
    j["gamma"] = bm.gamma;
    j["Q"] = mats_json(bm.Q);
    j["V"] = vecs_json(bm.V);
    j["pi_b"] = mats_json(bm.pi_b.probs);
    return j;
}

BehaviorModel behavior_from_json(const json& j) {
    check_schema(j, "behavior_model");
    BehaviorModel bm;
    const int S = j.at("S").get<int>();
    const int A = j.at("A").get<int>();
    bm.gamma = j.at("gamma").get<double>();
    for (const auto& q : j.at("Q")) bm.Q.push_back(mat_unflat(q, S, A));
    for (const auto& v : j.at("V")) bm.V.push_back(vec_unjson(v));
    for (const auto& p : j.at("pi_b")) bm.pi_b.probs.push_back(mat_unflat(p, S, A));
    return bm;
}

json to_json(const ChoiceDataset& ds) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["type"] = "choice_dataset";
    j["n"] = ds.n;
    j["H"] = ds.H;
    j["S"] = ds.S;
    j["A"] = ds.A;
    j["seed"] = ds.seed;
    j["gamma"] = ds.gamma;
    j["mechanism"] = to_string(ds.mechanism);
    json steps = json::array();
    for (const auto& st : ds.steps) {
        json sj;
        sj["s"] = st.s;
        sj["a"] = st.a;
        sj["s_next"] = st.s_next;
        steps.push_back(std::move(sj));
    }
    j["steps"] = std::move(steps);
    return j;
}

ChoiceDataset dataset_from_json(const json& j) {
    check_schema(j, "choice_dataset");
    ChoiceDataset ds;
    ds.n = j.at("n").get<int>();
    ds.H = j.at("H").get<int>();
    ds.S = j.at("S").get<int>();
    ds.A = j.at("A").get<int>();
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.gamma = j.at("gamma").get<double>();
    ds.mechanism = mechanism_from_string(j.at("mechanism").get<std::string>());
    for (const auto& sj : j.at("steps")) {
        StepRecord st;
        st.s = sj.at("s").get<std::vector<int>>();
        st.a = sj.at("a").get<std::vector<int>>();
        st.s_next = sj.at("s_next").get<std::vector<int>>();
        ds.steps.push_back(std::move(st));
    }
    ds.validate();
    return ds;
}

json to_json(const EstimatedModel& est) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["type"] = "estimated_model";
    j["H"] = static_cast<int>(est.theta.size());
    j["S"] = static_cast<int>(est.Q_hat.empty() ? 0 : est.Q_hat[0].rows());
    j["A"] = static_cast<int>(est.Q_hat.empty() ? 0 : est.Q_hat[0].cols());
    j["d"] = static_cast<int>(est.theta.empty() ? 0 : est.theta[0].size());
    j["theta"] = vecs_json(est.theta);
    j["Q_hat"] = mats_json(est.Q_hat);
    j["V_hat"] = vecs_json(est.V_hat);
    j["pi_hat"] = mats_json(est.pi_hat.probs);
    j["log_likelihood"] = est.log_likelihood;
    json diag = json::array();
    for (const auto& d : est.diagnostics) {
        diag.push_back(json{{"iterations", d.iterations},
                            {"gradient_norm", d.gradient_norm},
                            {"on_boundary", d.on_boundary},
                            {"objective", d.objective}});
    }
    j["diagnostics"] = std::move(diag);
    return j;
}

EstimatedModel estimate_from_json(const json& j) {
    check_schema(j, "estimated_model");
    EstimatedModel est;
    const int S = j.at("S").get<int>();
    const int A = j.at("A").get<int>();
    for (const auto& t : j.at("theta")) est.theta.push_back(vec_unjson(t));
    for (const auto& q : j.at("Q_hat")) est.Q_hat.push_back(mat_unflat(q, S, A));
    for (const auto& v : j.at("V_hat")) est.V_hat.push_back(vec_unjson(v));
    for (const auto& p : j.at("pi_hat")) est.pi_hat.probs.push_back(mat_unflat(p, S, A));
    est.log_likelihood = j.at("log_likelihood").get<std::vector<double>>();
    for (const auto& dj : j.at("diagnostics")) {
        MleStepDiagnostics d;
        d.iterations = dj.at("iterations").get<int>();
        d.gradient_norm = dj.at("gradient_norm").get<double>();
        d.on_boundary = dj.at("on_boundary").get<bool>();
        d.objective = dj.at("objective").get<double>();
        est.diagnostics.push_back(d);
    }
    return est;
}

json to_json(const RecoveredReward& rec) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["type"] = "recovered_reward";
    j["H"] = static_cast<int>(rec.w_hat.size());
    j["d"] = static_cast<int>(rec.w_hat.empty() ? 0 : rec.w_hat[0].size());
    j["lambda_reg"] = rec.lambda_reg;
    j["w_hat"] = vecs_json(rec.w_hat);
    j["Lambda"] = mats_json(rec.Lambda);
    return j;
}

RecoveredReward reward_from_json(const json& j) {
    check_schema(j, "recovered_reward");
    RecoveredReward rec;
    const int d = j.at("d").get<int>();
    rec.lambda_reg = j.at("lambda_reg").get<double>();
    for (const auto& w : j.at("w_hat")) rec.w_hat.push_back(vec_unjson(w));
    for (const auto& L : j.at("Lambda")) rec.Lambda.push_back(mat_unflat(L, d, d));
    return rec;
}

json to_json(const PessimisticPolicy& pp) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["type"] = "pessimistic_policy";
    j["H"] = static_cast<int>(pp.Q_tilde.size());
    j["S"] = static_cast<int>(pp.Q_tilde.empty() ? 0 : pp.Q_tilde[0].rows());
    j["A"] = static_cast<int>(pp.Q_tilde.empty() ? 0 : pp.Q_tilde[0].cols());
    j["beta"] = pp.beta;
    j["lambda_reg"] = pp.lambda_reg;
    json acts = json::array();
    for (const auto& a : pp.actions)
        acts.push_back(std::vector<int>(a.data(), a.data() + a.size()));
    j["actions"] = std::move(acts);
    j["Q_tilde"] = mats_json(pp.Q_tilde);
    j["V_tilde"] = vecs_json(pp.V_tilde);
    j["Gamma"] = mats_json(pp.Gamma);
    j["u_tilde"] = vecs_json(pp.u_tilde);
    return j;
}

PessimisticPolicy policy_from_json(const json& j) {
    check_schema(j, "pessimistic_policy");
    PessimisticPolicy pp;
    const int S = j.at("S").get<int>();
    const int A = j.at("A").get<int>();
    pp.beta = j.at("beta").get<double>();
    pp.lambda_reg = j.at("lambda_reg").get<double>();
    for (const auto& aj : j.at("actions")) {
        auto v = aj.get<std::vector<int>>();
        pp.actions.push_back(Eigen::Map<const Eigen::VectorXi>(v.data(),
                                                               static_cast<Eigen::Index>(v.size())));
    }
    for (const auto& q : j.at("Q_tilde")) pp.Q_tilde.push_back(mat_unflat(q, S, A));
    for (const auto& v : j.at("V_tilde")) pp.V_tilde.push_back(vec_unjson(v));
    for (const auto& g : j.at("Gamma")) pp.Gamma.push_back(mat_unflat(g, S, A));
    for (const auto& u : j.at("u_tilde")) pp.u_tilde.push_back(vec_unjson(u));
    pp.pi_tilde = PolicyTable::deterministic(pp.actions, A);
    return pp;
}

json to_json(const KernelEstimate& est) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["type"] = "kernel_estimate";
    j["kernel"] = json{{"kind", to_string(est.spec.kind)},
                       {"bandwidth", est.spec.bandwidth},
                       {"degree", est.spec.degree},
                       {"offset", est.spec.offset},
                       {"lambda", est.spec.lambda},
                       {"rkhs_norm_bound", est.spec.rkhs_norm_bound}};
    json steps = json::array();
    for (const auto& ks : est.steps) {
        json sj;
        sj["z"] = ks.z;
        sj["rep"] = ks.rep;
        sj["K"] = mat_flat(ks.K);
        sj["y"] = vec_json(ks.y);
        sj["alpha_r"] = vec_json(ks.alpha_r);
        sj["alpha_q"] = vec_json(ks.alpha_q);
        sj["alpha_pv"] = vec_json(ks.alpha_pv);
        steps.push_back(std::move(sj));
    }
    j["steps"] = std::move(steps);
    j["Q_hat"] = mats_json(est.Q_hat);
    j["V_hat"] = vecs_json(est.V_hat);
    j["pi_hat"] = mats_json(est.pi_hat.probs);
    j["r_hat"] = mats_json(est.r_hat);
    return j;
}

json to_json(const CoverageReport& rep) {
    return json{{"c_per_step", rep.c_per_step},
                {"min_eig_per_step", rep.min_eig_per_step},
                {"c_dagger_estimate", rep.c_dagger_estimate},
                {"min_eig_Sigma_b", rep.min_eig_Sigma_b}};
}

json to_json(const EffectiveDimensions& ed) {
    return json{{"d_eff_sample", ed.d_eff_sample}, {"d_eff_pop", ed.d_eff_pop}};
}

json to_json(const ViolationStats& vs) {
    return json{{"violations_per_step", vs.violations_per_step},
                {"total_violations", vs.total_violations},
                {"total_cells", vs.total_cells},
                {"max_ratio", vs.max_ratio},
                {"violation_fraction", vs.violation_fraction},
                {"any_violation", vs.any_violation}};
}

json to_json(const SlopeFit& fit) {
    return json{{"defined", fit.defined},
                {"slope", fit.slope},
                {"intercept", fit.intercept},
                {"std_error", fit.std_error},
                {"points_used", fit.points_used},
                {"excluded_n", fit.excluded_n}};
}

json to_json(const CalibrationResult& cal) {
    return json{{"chosen_c", cal.chosen_c},
                {"qualified", cal.qualified},
                {"c_grid", cal.c_grid},
                {"violation_frequency", cal.violation_frequency}};
}

json to_json(const SweepResult& sr) {
    json j;
    j["n_grid"] = sr.spec.n_grid;
    j["seeds_per_n"] = sr.spec.seeds_per_n;
    j["failed_runs"] = sr.failed_runs;
    j["mean_subopt"] = sr.mean_subopt;
    j["mean_pi_err"] = sr.mean_pi_err;
    j["mean_cert_ratio"] = sr.mean_cert_ratio;
    j["subopt_slope"] = to_json(sr.subopt_slope);
    j["pi_err_slope"] = to_json(sr.pi_err_slope);
    j["cert_ratio_slope"] = to_json(sr.cert_ratio_slope);
    return j;
}

std::string dataset_to_csv(const ChoiceDataset& ds) {
    std::ostringstream os;
    os << "traj,h,s,a,s_next\n";
    for (int i = 0; i < ds.n; ++i)
        for (int h = 0; h < ds.H; ++h)
            os << i << ',' << h << ',' << ds.steps[h].s[i] << ',' << ds.steps[h].a[i] << ','
               << ds.steps[h].s_next[i] << '\n';
    return os.str();
}

std::string certificate_to_csv(const RewardCertificate& cert) {
    std::ostringstream os;
    os << "h,s,a,abs_err,ratio\n";
    for (std::size_t h = 0; h < cert.abs_err.size(); ++h)
        for (Eigen::Index s = 0; s < cert.abs_err[h].rows(); ++s)
            for (Eigen::Index a = 0; a < cert.abs_err[h].cols(); ++a)
                os << h << ',' << s << ',' << a << ',' << fmt_double(cert.abs_err[h](s, a)) << ','
                   << fmt_double(cert.ratio[h](s, a)) << '\n';
    return os.str();
}

std::string penalties_to_csv(const PessimisticPolicy& pp) {
    std::ostringstream os;
    os << "h,s,a,gamma,q_tilde\n";
    for (std::size_t h = 0; h < pp.Gamma.size(); ++h)
        for (Eigen::Index s = 0; s < pp.Gamma[h].rows(); ++s)
            for (Eigen::Index a = 0; a < pp.Gamma[h].cols(); ++a)
                os << h << ',' << s << ',' << a << ',' << fmt_double(pp.Gamma[h](s, a)) << ','
                   << fmt_double(pp.Q_tilde[h](s, a)) << '\n';
    return os.str();
}

std::string sweep_cell_csv_header() {
    return "n,rep,data_seed,beta,subopt,mle_pi_err,mle_q_err,cert_max_ratio,"
           "violation_fraction,any_violation,theorem_bound,dominance_ok,failed,failure";
}

std::string sweep_cell_csv_row(const CellResult& c) {
    std::ostringstream os;
    os << c.n << ',' << c.rep << ',' << c.data_seed << ',' << fmt_double(c.beta) << ','
       << fmt_double(c.subopt) << ',' << fmt_double(c.mle_pi_err) << ','
       << fmt_double(c.mle_q_err) << ',' << fmt_double(c.cert_max_ratio) << ','
       << fmt_double(c.violation_fraction) << ',' << (c.any_violation ? 1 : 0) << ','
       << fmt_double(c.theorem_bound) << ',' << (c.dominance_ok ? 1 : 0) << ','
       << (c.failed ? 1 : 0) << ',' << '"' << c.failure << '"';
    return os.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path dir = path.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out.good()) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

std::string config_hash(const json& config) {
    std::string dump = config.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

} // namespace dcppo
