// Model file format, version 1 (plain text, one record per line):
//
//   ddsvr-model 1
//   kernel <linear|rbf>
//   gamma <real>
//   c <real>
//   epsilon <real>
//   target_scale <real>
//   bias <real>
//   n <rows>
//   d <cols>
//   scaling <0|1>
//   means <d reals>          (only when scaling is 1)
//   stds <d reals>           (only when scaling is 1)
//   <beta_i> <x_i1> ... <x_id>   (n lines, training rows in order)
//
// Reals are written in shortest round-trip form, so a reloaded model
// reproduces predictions bit for bit.

#include "ddsvr/solver.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace ddsvr {

namespace {

constexpr int kFormatVersion = 1;

std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_real(const std::string& token, const std::string& what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw ValidationError("model file: bad value '" + token + "' for " + what);
    }
    return v;
}

std::string expect_key(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("model file: unexpected end of file before '" + key + "'");
    }
    std::istringstream ls(line);
    std::string k;
    std::string value;
    ls >> k;
    std::getline(ls >> std::ws, value);
    if (k != key) {
        throw ValidationError("model file: expected '" + key + "', found '" + k + "'");
    }
    return value;
}

std::vector<double> parse_reals(const std::string& text, std::size_t count, const std::string& what) {
    std::istringstream ls(text);
    std::vector<double> out;
    std::string tok;
    while (ls >> tok) {
        out.push_back(parse_real(tok, what));
    }
    if (out.size() != count) {
        throw ValidationError("model file: expected " + std::to_string(count) + " values for " +
                              what + ", found " + std::to_string(out.size()));
    }
    return out;
}

}  // namespace

void save_model(const SvrModel& model, std::ostream& out) {
    const auto& train = model.train_ref;
    const auto& cfg = model.config;
    out << "ddsvr-model " << kFormatVersion << '\n';
    out << "kernel " << to_string(cfg.kernel.family) << '\n';
    out << "gamma " << fmt(cfg.kernel.gamma) << '\n';
    out << "c " << fmt(cfg.c) << '\n';
    out << "epsilon " << fmt(cfg.epsilon) << '\n';
    out << "target_scale " << fmt(model.target_scale) << '\n';
    out << "bias " << fmt(model.bias) << '\n';
    out << "n " << train.rows() << '\n';
    out << "d " << train.cols() << '\n';
    const auto& stats = train.scaling();
    out << "scaling " << (stats.empty() ? 0 : 1) << '\n';
    if (!stats.empty()) {
        out << "means";
        for (double v : stats.means) {
            out << ' ' << fmt(v);
        }
        out << "\nstds";
        for (double v : stats.stds) {
            out << ' ' << fmt(v);
        }
        out << '\n';
    }
    for (std::size_t i = 0; i < train.rows(); ++i) {
        out << fmt(model.beta[i]);
        for (double v : train.row(i)) {
            out << ' ' << fmt(v);
        }
        out << '\n';
    }
}

SvrModel load_model(std::istream& in) {
    const auto version = expect_key(in, "ddsvr-model");
    if (version != std::to_string(kFormatVersion)) {
        throw ValidationError("model file: unsupported format version '" + version + "'");
    }
    SvrModel model;
    model.config.kernel.family = parse_kernel_family(expect_key(in, "kernel"));
    model.config.kernel.gamma = parse_real(expect_key(in, "gamma"), "gamma");
    model.config.c = parse_real(expect_key(in, "c"), "c");
    model.config.epsilon = parse_real(expect_key(in, "epsilon"), "epsilon");
    model.target_scale = parse_real(expect_key(in, "target_scale"), "target_scale");
    model.bias = parse_real(expect_key(in, "bias"), "bias");
    const auto n = static_cast<std::size_t>(parse_real(expect_key(in, "n"), "n"));
    const auto d = static_cast<std::size_t>(parse_real(expect_key(in, "d"), "d"));
    const bool has_scaling = expect_key(in, "scaling") == "1";
    Standardization stats;
    if (has_scaling) {
        stats.means = parse_reals(expect_key(in, "means"), d, "means");
        stats.stds = parse_reals(expect_key(in, "stds"), d, "stds");
    }
    std::vector<double> features;
    features.reserve(n * d);
    model.beta.reserve(n);
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) {
            throw ValidationError("model file: expected " + std::to_string(n) + " rows, found " +
                                  std::to_string(i));
        }
        const auto values = parse_reals(line, d + 1, "row " + std::to_string(i));
        model.beta.push_back(values[0]);
        features.insert(features.end(), values.begin() + 1, values.end());
    }
    Dataset train(n, d, std::move(features), std::vector<double>(n, 0.0));
    if (has_scaling) {
        // Rows on disk are already standardized; re-attach the statistics.
        train = train.with_scaling(std::move(stats));
    }
    model.train_ref = std::move(train);
    model.config.validate();
    for (std::size_t k = 0; k < n; ++k) {
        if (model.beta[k] != 0.0) {
            model.support_indices.push_back(k);
        }
    }
    return model;
}

}  // namespace ddsvr
