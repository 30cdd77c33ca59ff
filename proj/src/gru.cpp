#include "remtrack/gru.hpp"

#include <stdexcept>

#include "remtrack/optim.hpp"

namespace remtrack::ad {

GruCellParams GruCellParams::declare(ParameterStore& store, const std::string& prefix,
                                     std::size_t input_dim, std::size_t hidden_dim,
                                     std::uint64_t seed) {
    if (input_dim == 0 || hidden_dim == 0) {
        throw std::invalid_argument("GruCellParams: dimensions must be positive");
    }
    Tensor wx = Tensor::matrix(3 * hidden_dim, input_dim);
    Tensor wh = Tensor::matrix(3 * hidden_dim, hidden_dim);
    for (std::size_t gate = 0; gate < 3; ++gate) {
        const Tensor bx = xavier_init(hidden_dim, input_dim, seed + 2 * gate);
        const Tensor bh = xavier_init(hidden_dim, hidden_dim, seed + 2 * gate + 1);
        std::copy(bx.data.begin(), bx.data.end(),
                  wx.data.begin() + static_cast<std::ptrdiff_t>(gate * bx.size()));
        std::copy(bh.data.begin(), bh.data.end(),
                  wh.data.begin() + static_cast<std::ptrdiff_t>(gate * bh.size()));
    }
    store.add(prefix + ".wx", std::move(wx));
    store.add(prefix + ".wh", std::move(wh));
    store.add(prefix + ".b", Tensor::vector(3 * hidden_dim));
    return bind(store, prefix);
}

GruCellParams GruCellParams::bind(const ParameterStore& store, const std::string& prefix) {
    GruCellParams p;
    p.wx = store.ref(prefix + ".wx");
    p.wh = store.ref(prefix + ".wh");
    p.bias = store.ref(prefix + ".b");
    p.hidden_dim = p.wh->cols();
    p.input_dim = p.wx->cols();
    const std::size_t h3 = 3 * p.hidden_dim;
    if (p.wx->rank() != 2 || p.wh->rank() != 2 || p.wx->rows() != h3 || p.wh->rows() != h3 ||
        p.bias->size() != h3) {
        throw std::invalid_argument("GruCellParams: inconsistent shapes under '" + prefix + "'");
    }
    return p;
}

Var gru_cell(Tape& tape, const GruCellParams& p, Var x, Var h_prev) {
    const std::size_t H = p.hidden_dim;
    if (tape.size(x) != p.input_dim || tape.size(h_prev) != H) {
        throw std::invalid_argument("gru_cell: expected input " + std::to_string(p.input_dim) +
                                    " / hidden " + std::to_string(H) + ", got " +
                                    std::to_string(tape.size(x)) + " / " +
                                    std::to_string(tape.size(h_prev)));
    }
    const Var gx = tape.affine(p.wx, p.bias, x);
    const Var gh = tape.matvec(p.wh, h_prev, 0, 2 * H);
    const Var z = tape.sigmoid(tape.add(tape.slice(gx, 0, H), tape.slice(gh, 0, H)));
    const Var r = tape.sigmoid(tape.add(tape.slice(gx, H, H), tape.slice(gh, H, H)));
    const Var rh = tape.matvec(p.wh, tape.mul(r, h_prev), 2 * H, H);
    const Var n = tape.tanh(tape.add(tape.slice(gx, 2 * H, H), rh));
    return tape.add(tape.mul(tape.one_minus(z), h_prev), tape.mul(z, n));
}

}  // namespace remtrack::ad
