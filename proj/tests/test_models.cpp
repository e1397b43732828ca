#include "doctest.h"

#include <cmath>

#include "covalue/errors.hpp"
#include "covalue/kernels.hpp"
#include "covalue/linalg.hpp"
#include "covalue/models.hpp"
#include "test_support.hpp"

using namespace covalue;

TEST_CASE("kernel entries, hand-checked") {
    Eigen::MatrixXd a(1, 1), b(1, 1);
    a << 0.0;
    b << 1.0;

    auto se = KernelSpec::squared_exponential(1.0, Eigen::VectorXd::Ones(1));
    CHECK(kernel_matrix(se, a, b)(0, 0) ==
          doctest::Approx(0.6065306597126334).epsilon(1e-15));  // exp(-1/2)
    CHECK(kernel_matrix(se, a, a)(0, 0) == 1.0);

    auto ex = KernelSpec::exponential(1.0, Eigen::VectorXd::Ones(1));
    CHECK(kernel_matrix(ex, a, b)(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

    // Lengthscale rescales the distance; signal variance scales the value.
    auto se2 = KernelSpec::squared_exponential(3.0, Eigen::VectorXd::Constant(1, 2.0));
    CHECK(kernel_matrix(se2, a, b)(0, 0) == doctest::Approx(3.0 * std::exp(-0.125)).epsilon(1e-15));

    auto sum = KernelSpec::sum(se, ex);
    CHECK(kernel_matrix(sum, a, b)(0, 0) ==
          doctest::Approx(std::exp(-0.5) + std::exp(-1.0)).epsilon(1e-15));
    CHECK(sum.diagonal_value() == doctest::Approx(2.0));
    CHECK(sum.dim() == 1);
}

TEST_CASE("kernel matrices are symmetric with the signal variance on the diagonal") {
    auto x = support::random_dataset(12, 3, 5).inputs;
    for (std::uint64_t s = 0; s < 4; ++s) {
        auto model = support::random_gp(3, s);
        const auto& kernel = std::get<GpModel>(model.model).kernel;
        Eigen::MatrixXd k = kernel_matrix(kernel, x, x);
        CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::VectorXd diag = kernel_diagonal(kernel, x);
        CHECK((k.diagonal() - diag).cwiseAbs().maxCoeff() == 0.0);
        CHECK(diag[0] == doctest::Approx(kernel.diagonal_value()).epsilon(1e-15));
        // Gram matrices of valid kernels are PSD: the jittered Cholesky
        // must succeed.
        CHECK_NOTHROW(cholesky_psd(k, "test gram"));
    }
    Eigen::MatrixXd other = support::random_dataset(5, 3, 6).inputs;
    auto se = KernelSpec::squared_exponential(1.0, Eigen::VectorXd::Ones(3));
    Eigen::MatrixXd cross = kernel_matrix(se, x, other);
    CHECK(cross.rows() == 12);
    CHECK(cross.cols() == 5);
}

TEST_CASE("kernel validation") {
    CHECK_THROWS_AS(KernelSpec::squared_exponential(0.0, Eigen::VectorXd::Ones(2)).validate(),
                    ConfigError);
    CHECK_THROWS_AS(KernelSpec::squared_exponential(-1.0, Eigen::VectorXd::Ones(2)).validate(),
                    ConfigError);
    CHECK_THROWS_AS(KernelSpec::exponential(1.0, Eigen::VectorXd::Zero(2)).validate(),
                    ConfigError);
    CHECK_THROWS_AS(KernelSpec::exponential(1.0, Eigen::VectorXd()).validate(), ConfigError);
    auto a = KernelSpec::squared_exponential(1.0, Eigen::VectorXd::Ones(2));
    auto b = KernelSpec::squared_exponential(1.0, Eigen::VectorXd::Ones(3));
    CHECK_THROWS_AS(KernelSpec::sum(a, b).validate(), ConfigError);
    CHECK_NOTHROW(KernelSpec::sum(a, a).validate());
}

TEST_CASE("model spec validation and accessors") {
    auto blr = support::random_blr(3, 1);
    CHECK(std::string(blr.kind()) == "blr");
    CHECK(blr.input_dim() == 3);
    CHECK(blr.noise_variance() > 0.0);
    CHECK_NOTHROW(blr.validate());

    BlrModel bad = std::get<BlrModel>(blr.model);
    bad.noise_variance = 0.0;
    CHECK_THROWS_AS(ModelSpec{bad}.validate(), ConfigError);
    bad = std::get<BlrModel>(blr.model);
    bad.prior_cov = Eigen::MatrixXd::Ones(2, 3);
    CHECK_THROWS_AS(ModelSpec{bad}.validate(), ConfigError);
    bad = std::get<BlrModel>(blr.model);
    bad.prior_cov(0, 1) += 0.5;  // asymmetric
    CHECK_THROWS_AS(ModelSpec{bad}.validate(), ConfigError);

    auto gp = support::random_gp(4, 2);
    CHECK(std::string(gp.kind()) == "gp");
    CHECK(gp.input_dim() == 4);
    CHECK_NOTHROW(gp.validate());

    DtcModel dtc{std::get<GpModel>(gp.model).kernel, 1.0,
                 support::random_dataset(5, 4, 3).inputs};
    CHECK(std::string(ModelSpec{dtc}.kind()) == "dtc");
    CHECK_NOTHROW(ModelSpec{dtc}.validate());
    DtcModel empty_u = dtc;
    empty_u.inducing_inputs = Eigen::MatrixXd(0, 4);
    CHECK_THROWS_AS(ModelSpec{empty_u}.validate(), ConfigError);
    DtcModel wrong_d = dtc;
    wrong_d.inducing_inputs = Eigen::MatrixXd::Zero(5, 2);
    CHECK_THROWS_AS(ModelSpec{wrong_d}.validate(), ConfigError);

    CHECK(homoscedastic_noise(gp, 4).size() == 4);
    CHECK(homoscedastic_noise(gp, 0).size() == 0);
}

TEST_CASE("blr information gain: hand case and closed-form oracle") {
    // Unit prior, unit noise, a single observation at x = 1:
    // 0.5 log det(1 + 1) = 0.5 log 2.
    BlrModel unit{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 1.0};
    Eigen::MatrixXd x(1, 1);
    x << 1.0;
    CHECK(information_gain(ModelSpec{unit}, x) ==
          doctest::Approx(0.34657359027997264).epsilon(1e-14));

    for (std::uint64_t s = 0; s < 25; ++s) {
        Eigen::Index d = 1 + static_cast<Eigen::Index>(s % 4);
        Eigen::Index m = 1 + static_cast<Eigen::Index>((3 * s) % 30);
        auto model = support::random_blr(d, 100 + s);
        auto data = support::random_dataset(m, d, 200 + s);
        const auto& blr = std::get<BlrModel>(model.model);
        double got = information_gain(model, data.inputs);
        double want = support::blr_ig_closed(blr, data.inputs);
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
        CHECK(got >= 0.0);

        // Heteroscedastic noise against the same determinant identity.
        Eigen::VectorXd noise(m);
        auto eng = rng::engine(s, "test.noise");
        std::uniform_real_distribution<double> nd(0.4, 3.0);
        for (Eigen::Index i = 0; i < m; ++i) noise[i] = nd(eng);
        CHECK(information_gain(model, data.inputs, noise) ==
              doctest::Approx(support::blr_ig_closed(blr, data.inputs, noise)).epsilon(1e-10));
    }
}

TEST_CASE("gp information gain: eigenvalue and entropy-difference oracles") {
    // One observation: 0.5 log(1 + k(x,x)/sigma^2).
    GpModel one{KernelSpec::squared_exponential(2.0, Eigen::VectorXd::Ones(2)), 0.5};
    Eigen::MatrixXd x(1, 2);
    x << 0.3, -0.7;
    CHECK(information_gain(ModelSpec{one}, x) ==
          doctest::Approx(0.5 * std::log(1.0 + 2.0 / 0.5)).epsilon(1e-14));

    for (std::uint64_t s = 0; s < 20; ++s) {
        Eigen::Index d = 1 + static_cast<Eigen::Index>(s % 3);
        Eigen::Index m = 2 + static_cast<Eigen::Index>(s % 9);
        auto model = support::random_gp(d, 300 + s);
        auto data = support::random_dataset(m, d, 400 + s);
        const auto& gp = std::get<GpModel>(model.model);

        double got = information_gain(model, data.inputs);
        CHECK(got == doctest::Approx(support::gp_ig_closed(gp.kernel, gp.noise_variance,
                                                           data.inputs)).epsilon(1e-10));

        // Entropy difference needs K itself invertible: spread the points
        // out to keep the Gram matrix well away from singular.
        Eigen::MatrixXd spread = data.inputs;
        for (Eigen::Index i = 0; i < m; ++i) spread(i, 0) += 3.0 * static_cast<double>(i);
        Eigen::VectorXd noise = Eigen::VectorXd::Constant(m, std::max(0.25, gp.noise_variance));
        double lib = information_gain(model, spread, noise);
        double oracle = support::gp_entropy_difference(gp.kernel, noise, spread);
        CHECK(lib == doctest::Approx(oracle).epsilon(1e-8));
    }
}

TEST_CASE("information gain ignores outputs and is monotone in data") {
    auto model = support::random_gp(2, 9);
    auto a = support::random_dataset(8, 2, 10);
    auto b = support::random_dataset(5, 2, 11);

    Eigen::MatrixXd ab(13, 2);
    ab << a.inputs, b.inputs;
    double ig_a = information_gain(model, a.inputs);
    double ig_ab = information_gain(model, ab);
    CHECK(ig_a >= 0.0);
    CHECK(ig_ab >= ig_a - 1e-9);  // more rows never lose information

    // Empty input matrix carries no information.
    CHECK(information_gain(model, Eigen::MatrixXd(0, 2)) == 0.0);
}

TEST_CASE("dtc with inducing set equal to the training inputs matches the full gp") {
    for (std::uint64_t s = 0; s < 8; ++s) {
        Eigen::Index d = 1 + static_cast<Eigen::Index>(s % 3);
        auto gp_model = support::random_gp(d, 500 + s);
        const auto& gp = std::get<GpModel>(gp_model.model);
        auto data = support::random_dataset(10, d, 600 + s);

        DtcModel dtc{gp.kernel, gp.noise_variance, data.inputs};
        double full = information_gain(gp_model, data.inputs);
        double sparse = information_gain(ModelSpec{dtc}, data.inputs);
        CHECK(sparse == doctest::Approx(full).epsilon(1e-6));
    }
}

TEST_CASE("dtc never reports more information than the full gp") {
    for (std::uint64_t s = 0; s < 8; ++s) {
        auto gp_model = support::random_gp(2, 700 + s);
        const auto& gp = std::get<GpModel>(gp_model.model);
        auto data = support::random_dataset(20, 2, 800 + s);
        Eigen::MatrixXd u = data.inputs.topRows(4);

        DtcModel dtc{gp.kernel, gp.noise_variance, u};
        double full = information_gain(gp_model, data.inputs);
        double sparse = information_gain(ModelSpec{dtc}, data.inputs);
        CHECK(sparse <= full + 1e-9);
        CHECK(sparse >= 0.0);
    }
}

TEST_CASE("coalition value tables") {
    auto parties = support::random_parties(3, 6, 2, 900);
    auto model = support::random_gp(2, 901);
    auto cf = coalition_values(model, parties);
    REQUIRE(cf.n() == 3);
    CHECK(cf.value(CoalitionMask{0}) == 0.0);

    // Every entry equals a direct information-gain call on the stacked
    // coalition data.
    for (CoalitionMask mask = 1; mask <= cf.grand_mask(); ++mask) {
        auto pooled = concat_coalition(parties, mask);
        CHECK(cf.value(mask) == doctest::Approx(information_gain(model, pooled.inputs))
                                    .epsilon(1e-12));
    }
    CHECK(static_cast<bool>(check_monotone(cf)));
    CHECK(static_cast<bool>(check_submodular(cf)));

    // Mixed input dimensions across parties are rejected.
    auto bad = parties;
    bad[1] = support::random_dataset(4, 3, 902);
    CHECK_THROWS_AS(coalition_values(model, bad), ConfigError);

    CHECK_THROWS_AS(coalition_values(model, std::vector<Dataset>{}), ConfigError);
    auto too_many = std::vector<Dataset>(kMaxExactParties + 1, parties[0]);
    CHECK_THROWS_AS(coalition_values(model, too_many), ConfigError);
}

TEST_CASE("posterior predictions") {
    SUBCASE("blr, hand case") {
        // Unit prior and noise, observe y = 2 at x = 1.  Posterior weight
        // mean 1, variance 1/2; prediction at x = 1 is N(1, 1/2 + 1).
        BlrModel unit{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 1.0};
        Eigen::MatrixXd x(1, 1), xs(1, 1);
        x << 1.0;
        xs << 1.0;
        Eigen::VectorXd y(1);
        y << 2.0;
        auto pred = posterior_predict(ModelSpec{unit}, x, y, homoscedastic_noise(ModelSpec{unit}, 1), xs);
        REQUIRE(pred.means.size() == 1);
        CHECK(pred.means[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pred.variances[0] == doctest::Approx(1.5).epsilon(1e-12));
    }
    SUBCASE("blr prior predictive") {
        BlrModel blr{Eigen::VectorXd::Constant(2, 0.5), 2.0 * Eigen::MatrixXd::Identity(2, 2),
                     0.7};
        Eigen::MatrixXd xs(1, 2);
        xs << 1.0, 3.0;
        auto pred = posterior_predict(ModelSpec{blr}, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0),
                                      Eigen::VectorXd(0), xs);
        CHECK(pred.means[0] == doctest::Approx(0.5 * 1.0 + 0.5 * 3.0).epsilon(1e-12));
        CHECK(pred.variances[0] == doctest::Approx(2.0 * (1.0 + 9.0) + 0.7).epsilon(1e-12));
    }
    SUBCASE("gp prior predictive") {
        auto model = support::random_gp(2, 950);
        const auto& gp = std::get<GpModel>(model.model);
        Eigen::MatrixXd xs = support::random_dataset(3, 2, 951).inputs;
        auto pred = posterior_predict(model, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0),
                                      Eigen::VectorXd(0), xs);
        for (int i = 0; i < 3; ++i) {
            CHECK(pred.means[i] == 0.0);
            CHECK(pred.variances[i] ==
                  doctest::Approx(gp.kernel.diagonal_value() + gp.noise_variance).epsilon(1e-12));
        }
    }
    SUBCASE("gp nearly interpolates under tiny noise") {
        GpModel gp{KernelSpec::squared_exponential(1.0, Eigen::VectorXd::Constant(1, 0.6)), 1e-6};
        Dataset data = Dataset::empty(1);
        data.inputs.resize(7, 1);
        data.outputs.resize(7);
        // Separated inputs keep the kernel matrix well conditioned;
        // outputs bounded away from zero keep the comparison meaningful.
        for (Eigen::Index i = 0; i < 7; ++i) {
            data.inputs(i, 0) = static_cast<double>(i);
            data.outputs[i] = std::sin(0.8 * static_cast<double>(i)) + 2.0;
        }
        auto pred = posterior_predict(ModelSpec{gp}, data.inputs, data.outputs,
                                      homoscedastic_noise(ModelSpec{gp}, 7), data.inputs);
        for (Eigen::Index i = 0; i < 7; ++i) {
            CHECK(std::abs(pred.means[i] - data.outputs[i]) < 1e-3);
            CHECK(pred.variances[i] > 0.0);
            CHECK(pred.variances[i] < 1e-3);
        }
    }
    SUBCASE("dtc tracks the full gp when the inducing set is the training set") {
        auto model = support::random_gp(2, 953);
        const auto& gp = std::get<GpModel>(model.model);
        auto data = support::random_dataset(9, 2, 954);
        auto xs = support::random_dataset(4, 2, 955).inputs;
        auto noise = homoscedastic_noise(model, 9);
        auto full = posterior_predict(model, data.inputs, data.outputs, noise, xs);
        DtcModel dtc{gp.kernel, gp.noise_variance, data.inputs};
        auto sparse = posterior_predict(ModelSpec{dtc}, data.inputs, data.outputs, noise, xs);
        for (int i = 0; i < 4; ++i) {
            CHECK(std::abs(sparse.means[i] - full.means[i]) < 1e-5);
            CHECK(std::abs(sparse.variances[i] - full.variances[i]) < 1e-5);
        }
    }
    SUBCASE("shape and finiteness errors") {
        auto model = support::random_gp(2, 956);
        auto data = support::random_dataset(4, 2, 957);
        auto noise = homoscedastic_noise(model, 4);
        Eigen::MatrixXd xs = support::random_dataset(2, 2, 958).inputs;
        CHECK_THROWS_AS(posterior_predict(model, data.inputs, Eigen::VectorXd(3), noise, xs),
                        ConfigError);
        CHECK_THROWS_AS(posterior_predict(model, data.inputs, data.outputs,
                                          Eigen::VectorXd::Ones(3), xs), ConfigError);
        CHECK_THROWS_AS(posterior_predict(model, data.inputs, data.outputs, noise,
                                          Eigen::MatrixXd(2, 3)), ConfigError);
        Eigen::VectorXd bad_noise = noise;
        bad_noise[1] = 0.0;
        CHECK_THROWS_AS(posterior_predict(model, data.inputs, data.outputs, bad_noise, xs),
                        ConfigError);
    }
}

TEST_CASE("psd cholesky applies the jitter ladder but refuses clear indefiniteness") {
    Eigen::MatrixXd near_singular(2, 2);
    near_singular << 1.0, 1.0, 1.0, 1.0;  // rank one
    CHECK_NOTHROW(cholesky_psd(near_singular, "rank-one"));

    Eigen::MatrixXd indefinite(2, 2);
    indefinite << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(cholesky_psd(indefinite, "indefinite"), NumericError);

    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd l = cholesky_psd(id, "identity");
    CHECK((l - id).cwiseAbs().maxCoeff() == 0.0);
    CHECK(log_det_cholesky(l) == 0.0);
    CHECK(log_det_psd(4.0 * id, "scaled identity") ==
          doctest::Approx(3.0 * std::log(4.0)).epsilon(1e-14));
}
