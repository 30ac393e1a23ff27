#include "ddsvr/evaluation.hpp"
#include "ddsvr/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

using namespace ddsvr;

namespace {

Dataset sine_data(std::uint64_t seed, std::size_t n, double noise) {
    RngStream rng(seed, 0);
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(-3.0, 3.0);
        y[i] = std::sin(x[i]) + noise * rng.normal();
    }
    return Dataset(n, 1, std::move(x), std::move(y));
}

}  // namespace

TEST_CASE("mae and rmse by hand and against an independent sum") {
    const std::vector<double> p{1.0, 3.0};
    const std::vector<double> t{2.0, 2.0};
    CHECK(mae(p, t) == 1.0);
    CHECK(rmse(p, t) == 1.0);
    CHECK(mae(t, t) == 0.0);
    CHECK(rmse(t, t) == 0.0);

    RngStream rng(300, 0);
    std::vector<double> a(100);
    std::vector<double> b(100);
    for (std::size_t i = 0; i < 100; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    std::vector<double> diffs(100);
    for (std::size_t i = 0; i < 100; ++i) {
        diffs[i] = std::abs(a[i] - b[i]);
    }
    std::sort(diffs.begin(), diffs.end());
    const double sorted_sum = std::accumulate(diffs.begin(), diffs.end(), 0.0);
    CHECK(std::abs(mae(a, b) - sorted_sum / 100.0) <= 1e-12);

    const std::vector<double> short_vec{1.0};
    CHECK_THROWS_AS(mae(a, short_vec), ValidationError);
    CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), ValidationError);
}

TEST_CASE("rmse never falls below mae") {
    RngStream rng(301, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(20);
        std::vector<double> a(n);
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.normal() * 3.0;
            b[i] = rng.uniform(-1.0, 1.0);
        }
        REQUIRE(rmse(a, b) >= mae(a, b) * (1.0 - 1e-15));
        REQUIRE(mae(a, b) >= 0.0);
    }
}

TEST_CASE("sample standard deviation uses n - 1") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(sample_std(v) == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK_THROWS_AS(sample_std(std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("CM epsilon") {
    CHECK(cm_epsilon(0.0, 100) == 0.0);
    CHECK(cm_epsilon(1.0, 100) == doctest::Approx(0.64378).epsilon(1e-5));
    double previous = cm_epsilon(1.0, 10);
    for (std::size_t n : {100, 1000, 10000}) {
        const double v = cm_epsilon(1.0, n);
        CHECK(v < previous);
        previous = v;
    }
    CHECK_THROWS_AS(cm_epsilon(-1.0, 10), ValidationError);
}

TEST_CASE("C from the nearest-rank 0.95 quantile of |y|") {
    CHECK(c_cm(std::vector<double>(7, 2.0)) == 2.0);
    std::vector<double> y(100);
    std::iota(y.begin(), y.end(), 1.0);
    CHECK(c_cm(y) == 95.0);
    std::vector<double> neg(y);
    for (auto& v : neg) {
        v = -v;
    }
    CHECK(c_cm(neg) == c_cm(y));
    std::vector<double> shuffled{-3.0, 10.0, 0.5, -7.0, 2.0};
    // ceil(0.95 * 5) = 5: the largest |y|.
    CHECK(c_cm(shuffled) == 10.0);
}

TEST_CASE("k-fold partition covers every sample once") {
    for (std::size_t n : {10, 23, 100}) {
        for (std::size_t k : {2, 3, 10}) {
            const auto folds = kfold_partition(n, k, 301);
            REQUIRE(folds.size() == k);
            std::vector<std::size_t> all;
            std::size_t lo = n;
            std::size_t hi = 0;
            for (const auto& f : folds) {
                lo = std::min(lo, f.size());
                hi = std::max(hi, f.size());
                all.insert(all.end(), f.begin(), f.end());
            }
            CHECK(hi - lo <= 1);
            std::sort(all.begin(), all.end());
            std::vector<std::size_t> expected(n);
            std::iota(expected.begin(), expected.end(), 0);
            CHECK(all == expected);
        }
    }
    CHECK(kfold_partition(20, 4, 5) == kfold_partition(20, 4, 5));
    CHECK(kfold_partition(20, 4, 5) != kfold_partition(20, 4, 6));
    CHECK_THROWS_AS(kfold_partition(5, 1, 0), ValidationError);
    CHECK_THROWS_AS(kfold_partition(5, 6, 0), ValidationError);
}

TEST_CASE("k-CV selection") {
    const auto data = sine_data(302, 120, 0.1);
    const auto kernel = KernelSpec::rbf(1.0);
    const std::vector<double> one{0.37};
    CHECK(kcv_select(data, 5, one, kernel, 1.0, 1) == 0.37);
    const std::vector<double> two{0.01, 10.0};
    CHECK(kcv_select(data, 5, two, kernel, 1.0, 1) == 0.01);
    const std::vector<double> fwd{0.01, 0.1, 0.3, 0.6};
    const std::vector<double> rev{0.6, 0.3, 0.01, 0.1};
    CHECK(kcv_select(data, 5, fwd, kernel, 1.0, 9) == kcv_select(data, 5, rev, kernel, 1.0, 9));
    CHECK_THROWS_AS(kcv_select(data, 5, std::vector<double>{}, kernel, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(kcv_select(data, 5, std::vector<double>{-0.1}, kernel, 1.0, 1), ValidationError);
}

TEST_CASE("method names round-trip") {
    for (auto m : {MethodId::Tuning, MethodId::CM, MethodId::KCv, MethodId::DD}) {
        CHECK(parse_method(to_string(m)) == m);
    }
    CHECK_THROWS_AS(parse_method("svm"), ValidationError);
}

TEST_CASE("fit_method applies each selection rule") {
    const auto data = sine_data(303, 150, 0.3);
    const auto kernel = KernelSpec::rbf(1.0);
    MethodSettings settings;
    settings.folds = 5;

    const auto tuning = fit_method(MethodId::Tuning, data, kernel, settings);
    CHECK(tuning.epsilon_used == 0.1);
    CHECK(tuning.c_used == 1.0);
    CHECK_FALSE(tuning.s_hat.has_value());

    const auto cm = fit_method(MethodId::CM, data, kernel, settings);
    CHECK(cm.epsilon_used > 0.0);
    CHECK(cm.model.config.epsilon == cm.epsilon_used);

    const auto kcv = fit_method(MethodId::KCv, data, kernel, settings);
    CHECK(std::find(settings.candidates.begin(), settings.candidates.end(), kcv.epsilon_used) !=
          settings.candidates.end());

    const auto dd = fit_method(MethodId::DD, data, kernel, settings);
    REQUIRE(dd.s_hat.has_value());
    CHECK(dd.model.target_scale == *dd.s_hat);

    settings.c_rule = CRule::Cm;
    const auto cm_rule = fit_method(MethodId::CM, data, kernel, settings);
    CHECK(cm_rule.c_used == c_cm(data.targets()));
}

TEST_CASE("ratios against the tuning run on the same split") {
    const auto train = sine_data(304, 150, 0.3);
    const auto test = sine_data(305, 100, 0.3);
    const auto kernel = KernelSpec::rbf(1.0);
    MethodSettings settings;
    settings.folds = 5;
    const std::vector<MethodId> methods{MethodId::Tuning, MethodId::CM, MethodId::KCv, MethodId::DD};
    const auto reports = run_methods(methods, train, test, kernel, settings);
    REQUIRE(reports.size() == 4);
    CHECK(reports[0].method == MethodId::Tuning);
    CHECK(*reports[0].ratio_mae == 1.0);
    CHECK(*reports[0].ratio_rmse == 1.0);
    for (const auto& r : reports) {
        CHECK(std::abs(*r.ratio_mae * r.mae - reports[0].mae) <= 1e-12 * reports[0].mae);
        CHECK(std::abs(*r.ratio_rmse * r.rmse - reports[0].rmse) <= 1e-12 * reports[0].rmse);
        CHECK(r.rmse >= r.mae);
    }

    const std::vector<MethodId> dd_only{MethodId::DD};
    const auto only = run_methods(dd_only, train, test, kernel, settings);
    REQUIRE(only.size() == 1);
    CHECK(only[0].ratio_mae.has_value());
    CHECK(*only[0].ratio_mae == doctest::Approx(*reports[3].ratio_mae));

    std::vector<double> truth(test.rows());
    for (std::size_t i = 0; i < test.rows(); ++i) {
        truth[i] = std::sin(test.at(i, 0));
    }
    const auto vs_truth = run_method(MethodId::Tuning, train, test, kernel, settings, truth);
    CHECK(vs_truth.mae < reports[0].mae);
}

TEST_CASE("aggregation skips failed repetitions and uses ratios of means") {
    const std::vector<MethodId> methods{MethodId::Tuning, MethodId::DD};
    const auto make = [](double tuning_mae, double dd_mae, double s) {
        MetricReport t;
        t.method = MethodId::Tuning;
        t.mae = tuning_mae;
        t.rmse = 2.0 * tuning_mae;
        t.epsilon_used = 0.1;
        MetricReport d;
        d.method = MethodId::DD;
        d.mae = dd_mae;
        d.rmse = 2.0 * dd_mae;
        d.epsilon_used = 0.5;
        d.s_hat = s;
        attach_ratios(t, t);
        attach_ratios(d, t);
        return std::vector<MetricReport>{t, d};
    };
    std::vector<RepetitionOutcome> outcomes(3);
    outcomes[0].reports = make(2.0, 1.0, 0.8);
    outcomes[1].error = "solver gave up";
    outcomes[2].reports = make(4.0, 1.0, 1.2);
    const auto agg = aggregate_repetitions(outcomes, methods);
    REQUIRE(agg.size() == 2);
    CHECK(agg[1].completed == 2);
    CHECK(agg[1].failed == 1);
    CHECK(agg[1].first_failure == "solver gave up");
    CHECK(agg[1].mean_mae == 1.0);
    CHECK(agg[1].ratio_mae == doctest::Approx(3.0));
    CHECK(agg[1].ratio_rmse == doctest::Approx(3.0));
    CHECK(agg[1].mean_epsilon == 0.5);
    CHECK(*agg[1].mean_s_hat == doctest::Approx(1.0));
    CHECK(agg[0].ratio_mae == doctest::Approx(1.0));
    CHECK_FALSE(agg[0].mean_s_hat.has_value());
}

TEST_CASE("parallel_for runs every index exactly once") {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i].fetch_add(1); });
    CHECK(std::all_of(hits.begin(), hits.end(), [](const std::atomic<int>& h) { return h.load() == 1; }));
    int serial = 0;
    parallel_for(5, 1, [&](std::size_t) { ++serial; });
    CHECK(serial == 5);
    parallel_for(0, 3, [](std::size_t) { FAIL("no jobs expected"); });
}

TEST_CASE("report CSV format") {
    MetricReport r;
    r.method = MethodId::DD;
    r.mae = 0.5;
    r.rmse = 0.75;
    r.ratio_mae = 1.25;
    r.ratio_rmse = 1.5;
    r.epsilon_used = 0.1;
    r.s_hat = 0.3;
    r.seed = 42;
    MetricReport t;
    t.mae = 0.1;
    t.rmse = 0.2;
    const std::vector<ReportRow> rows{{"cell", r}, {"cell", t}};
    std::ostringstream out;
    write_report_csv(out, rows);
    CHECK(out.str() ==
          "experiment_id,method,mae,rmse,ratio_mae,ratio_rmse,epsilon_used,s_hat,seed\n"
          "cell,dd,0.5,0.75,1.25,1.5,0.1,0.3,42\n"
          "cell,tuning,0.1,0.2,NA,NA,0,NA,0\n");
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(std::nan("")) == "NA");
}
