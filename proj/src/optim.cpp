#include "remtrack/optim.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace remtrack::ad {

Tensor xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("xavier_init: rows and cols must be >= 1");
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t = Tensor::matrix(rows, cols);
    for (double& x : t.data) {
        x = dist(rng);
    }
    return t;
}

void adam_step(ParameterStore& store, const AdamConfig& config) {
    adam_step(store, config, [](const std::string&) { return true; });
}

void adam_step(ParameterStore& store, const AdamConfig& config, const TrainableFilter& trainable) {
    for (std::size_t s = 0; s < store.size(); ++s) {
        if (trainable(store.name(s)) && !store.tensor(s).grad) {
            throw std::invalid_argument("adam_step: missing gradient for parameter '" +
                                        store.name(s) + "'");
        }
    }
    for (std::size_t s = 0; s < store.size(); ++s) {
        if (!trainable(store.name(s))) {
            continue;
        }
        Tensor& t = store.tensor(s);
        AdamMoments& mom = store.moments(s);
        const auto& g = *t.grad;
        mom.step += 1;
        const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(mom.step));
        const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(mom.step));
        for (std::size_t k = 0; k < t.size(); ++k) {
            mom.m[k] = config.beta1 * mom.m[k] + (1.0 - config.beta1) * g[k];
            mom.v[k] = config.beta2 * mom.v[k] + (1.0 - config.beta2) * g[k] * g[k];
            const double m_hat = mom.m[k] / c1;
            const double v_hat = mom.v[k] / c2;
            t.data[k] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    }
    store.clear_gradients();
}

}  // namespace remtrack::ad
