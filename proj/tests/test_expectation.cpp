#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using jls::Matrix;
using jls::Vector;

namespace {

const std::vector<std::string> kAllFixtures = {
    "example2.json",  "example2_scaled.json", "example3.json", "example3_scaled.json",
    "lti_n2.json",    "rand_n2.json",         "rand_n3.json",  "mimo_n2.json"};

jls::SwitchSequence constant_sequence(int mode_index, int length) {
    jls::SwitchSequence seq;
    seq.entries.assign(length, mode_index);
    return seq;
}

}  // namespace

TEST_CASE("horizon-one operators are plain Kronecker squares", "[expectation]") {
    for (const std::string& name : kAllFixtures) {
        jls::JlsModel model = test_helpers::load_fixture(name);
        INFO(name);
        REQUIRE(test_helpers::max_abs_diff(jls::expected_obs_kron(model, 1),
                                           jls::kron(model.C, model.C)) < 1e-14);
        REQUIRE(test_helpers::max_abs_diff(jls::expected_ctrl_kron(model, 1),
                                           jls::kron(model.B, model.B)) < 1e-14);
        const Matrix cb = model.C * model.B;
        REQUIRE(test_helpers::max_abs_diff(jls::expected_hankel_kron(model, 1),
                                           jls::kron(cb, cb)) < 1e-13);
    }
}

TEST_CASE("single-mode operators factor into deterministic stacks", "[expectation]") {
    jls::JlsModel lti = test_helpers::load_fixture("lti_n2.json");
    const int T = 3;
    jls::SwitchSequence zeros = constant_sequence(0, T - 1);
    Matrix obs = jls::obs_stack_for_copy(lti, zeros, T);
    Matrix ctrl = jls::ctrl_stack_for_copy(lti, zeros, T);
    REQUIRE(test_helpers::max_abs_diff(jls::expected_obs_kron(lti, T), jls::kron(obs, obs)) <
            1e-13);
    REQUIRE(test_helpers::max_abs_diff(jls::expected_ctrl_kron(lti, T), jls::kron(ctrl, ctrl)) <
            1e-13);
    Matrix hankel = obs * ctrl;
    REQUIRE(test_helpers::max_abs_diff(jls::expected_hankel_kron(lti, T),
                                       jls::kron(hankel, hankel)) < 1e-12);
}

TEST_CASE("closed forms match brute-force enumeration", "[expectation]") {
    for (const std::string& name : kAllFixtures) {
        jls::JlsModel model = test_helpers::load_fixture(name);
        for (int T = 1; T <= 3; ++T) {
            INFO(name << " T=" << T);
            REQUIRE(test_helpers::max_abs_diff(
                        jls::expected_obs_kron(model, T),
                        jls::brute_force_expectation(model, T, jls::ExpectationTarget::obs)) <
                    1e-12);
            REQUIRE(test_helpers::max_abs_diff(
                        jls::expected_ctrl_kron(model, T),
                        jls::brute_force_expectation(model, T, jls::ExpectationTarget::ctrl)) <
                    1e-12);
            REQUIRE(test_helpers::max_abs_diff(
                        jls::expected_hankel_kron(model, T),
                        jls::brute_force_expectation(model, T, jls::ExpectationTarget::hankel)) <
                    1e-12);
        }
    }
}

TEST_CASE("operator bundle is assembled consistently", "[expectation]") {
    jls::JlsModel model = test_helpers::load_fixture("rand_n2.json");
    jls::ExpectationOperators ops = jls::expectation_operators(model, 3);
    REQUIRE(ops.T == 3);
    REQUIRE(test_helpers::max_abs_diff(ops.M, jls::mean_matrix(model)) == 0.0);
    REQUIRE(test_helpers::max_abs_diff(ops.S, jls::second_moment(model)) == 0.0);
    REQUIRE(test_helpers::max_abs_diff(ops.H_T, (ops.C_T * ops.B_T).eval()) == 0.0);
}

TEST_CASE("per-copy stacks against pinned sequences", "[expectation]") {
    jls::JlsModel ex2 = test_helpers::load_fixture("example2.json");
    const int T = 3;

    SECTION("cyclic mode grid on the permutation fixture") {
        jls::SwitchSequence twos = constant_sequence(1, T - 1);
        Matrix h = jls::hankel_for_copy(ex2, twos, twos, T);
        REQUIRE(h.rows() == T);
        REQUIRE(h.cols() == T);
        for (int r = 0; r < T; ++r)
            for (int i = 0; i < T; ++i) {
                const double expected = ((r + i) % 3 == 0) ? 1.0 : 0.0;
                REQUIRE(h(r, i) == expected);
            }
        REQUIRE(h(0, 0) == 1.0);  // C B in the top-left block
    }
    SECTION("single mode gives the classical Hankel grid") {
        jls::JlsModel lti = test_helpers::load_fixture("lti_n2.json");
        jls::SwitchSequence zeros = constant_sequence(0, T - 1);
        Matrix h = jls::hankel_for_copy(lti, zeros, zeros, T);
        Matrix power = Matrix::Identity(2, 2);
        for (int total = 0; total <= 2 * (T - 1); ++total) {
            Matrix expected = lti.C * power * lti.B;
            for (int r = 0; r <= total; ++r) {
                const int i = total - r;
                if (r < T && i < T) REQUIRE(h(r, i) == Catch::Approx(expected(0, 0)));
            }
            power = (lti.modes[0] * power).eval();
        }
    }
    SECTION("sequence length and index validation") {
        REQUIRE_THROWS_AS(jls::obs_stack_for_copy(ex2, constant_sequence(0, 1), 3),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(jls::ctrl_stack_for_copy(ex2, constant_sequence(7, 2), 3),
                          std::out_of_range);
    }
}

TEST_CASE("per-copy map reproduces the simulator tail", "[expectation]") {
    std::mt19937_64 engine(77);
    for (const std::string& name : {std::string("example2.json"), std::string("rand_n3.json"),
                                    std::string("mimo_n2.json")}) {
        jls::JlsModel model = test_helpers::load_fixture(name);
        const int T = 3;
        for (int trial = 0; trial < 30; ++trial) {
            jls::SwitchSequence theta;
            for (int k = 0; k < 2 * T - 1; ++k)
                theta.entries.push_back(
                    static_cast<int>(jls::uniform01(engine) * model.s) % model.s);
            std::vector<Vector> inputs;
            Vector stacked(model.p * T);
            for (int t = 0; t < T; ++t) {
                inputs.push_back(test_helpers::random_matrix(model.p, 1, engine).col(0));
                stacked.segment(t * model.p, model.p) = inputs.back();
            }
            jls::Trajectory traj = jls::simulate_with_switches(model, theta, inputs);

            jls::SwitchSequence sigma, mu;
            for (int k = T - 1; k >= 1; --k) sigma.entries.push_back(theta.entries[k]);
            for (int k = T; k <= 2 * T - 2; ++k) mu.entries.push_back(theta.entries[k]);
            Matrix h = jls::hankel_for_copy(model, mu, sigma, T);
            Vector tail = h * jls::reverse_blocks(stacked, model.p);
            for (int r = 0; r < T; ++r) {
                Vector expected = traj.outputs[T - 1 + r];
                REQUIRE((tail.segment(r * model.m, model.m) - expected).norm() < 1e-10);
            }
        }
    }
}

TEST_CASE("enumeration guard rails", "[expectation]") {
    jls::JlsModel ex3 = test_helpers::load_fixture("example3.json");
    REQUIRE_THROWS_AS(jls::brute_force_expectation(ex3, 12, jls::ExpectationTarget::obs),
                      std::runtime_error);
    REQUIRE_THROWS_AS(jls::brute_force_expectation(ex3, 7, jls::ExpectationTarget::hankel),
                      std::runtime_error);
    REQUIRE(jls::expectation_target_from_string("obs") == jls::ExpectationTarget::obs);
    REQUIRE(jls::expectation_target_from_string("ctrl") == jls::ExpectationTarget::ctrl);
    REQUIRE(jls::expectation_target_from_string("hankel") == jls::ExpectationTarget::hankel);
    REQUIRE_THROWS_AS(jls::expectation_target_from_string("spectral"), std::invalid_argument);
}
