#include "owd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace owd {

namespace {

constexpr double kProbClamp = 1e-7;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// One focal entry; returns the loss and optionally d/dz.
double focal_entry(double z, int target, double alpha, double gamma, double* dz) {
    const double p = sigmoid(z);
    if (target == 1) {
        const double one_m_p = sigmoid(-z);
        const double logp = -softplus(-z);
        const double w = std::pow(one_m_p, gamma);
        if (dz) *dz = alpha * gamma * p * w * logp - alpha * w * one_m_p;
        return -alpha * w * logp;
    }
    const double log1mp = -softplus(z);
    const double w = std::pow(p, gamma);
    if (dz) *dz = -(1.0 - alpha) * gamma * (1.0 - p) * w * log1mp + (1.0 - alpha) * w * p;
    return -(1.0 - alpha) * w * log1mp;
}

}  // namespace

double sigmoid_focal_loss(std::span<const double> logits, std::span<const int> targets,
                          double alpha, double gamma, Vec* dlogits) {
    if (logits.size() != targets.size())
        throw std::invalid_argument("sigmoid_focal_loss: length mismatch");
    if (dlogits) dlogits->assign(logits.size(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (targets[i] != 0 && targets[i] != 1)
            throw std::invalid_argument("sigmoid_focal_loss: targets must be 0/1");
        double dz = 0.0;
        loss += focal_entry(logits[i], targets[i], alpha, gamma, dlogits ? &dz : nullptr);
        if (dlogits) (*dlogits)[i] = dz;
    }
    return loss;
}

double energy_margin_loss(std::span<const double> offsets, std::span<const MatchStatus> statuses,
                          double margin, Vec* doffsets) {
    if (offsets.size() != statuses.size())
        throw std::invalid_argument("energy_margin_loss: length mismatch");
    if (doffsets) doffsets->assign(offsets.size(), 0.0);
    if (offsets.empty()) return 0.0;

    const double inv_n = 1.0 / static_cast<double>(offsets.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        if (statuses[i].is_gt()) {
            const double h = std::max(0.0, margin + offsets[i]);
            loss += h * h * inv_n;
            if (doffsets) (*doffsets)[i] = 2.0 * h * inv_n;
        } else if (statuses[i].is_pseudo()) {
            const double h = std::max(0.0, margin - offsets[i]);
            loss += h * h * inv_n;
            if (doffsets) (*doffsets)[i] = -2.0 * h * inv_n;
        }
    }
    return loss;
}

double subspace_focal_loss(std::span<const SubspaceScores> scores,
                           std::span<const MatchStatus> statuses, double alpha, double gamma,
                           std::vector<SubspaceScores>* dscores) {
    if (scores.size() != statuses.size())
        throw std::invalid_argument("subspace_focal_loss: length mismatch");
    if (dscores) dscores->assign(scores.size(), SubspaceScores{});
    if (scores.empty()) return 0.0;

    const double inv_n = 1.0 / static_cast<double>(scores.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int tk = statuses[i].is_gt() ? 1 : 0;
        const int tu = statuses[i].is_pseudo() ? 1 : 0;
        double dk = 0.0, du = 0.0;
        loss += focal_entry(scores[i].s_known, tk, alpha, gamma, dscores ? &dk : nullptr) * inv_n;
        loss += focal_entry(scores[i].s_unknown, tu, alpha, gamma, dscores ? &du : nullptr) * inv_n;
        if (dscores) (*dscores)[i] = {dk * inv_n, du * inv_n};
    }
    return loss;
}

double separation_loss(std::span<const SubspaceScores> scores,
                       std::span<const MatchStatus> statuses, double margin, double alpha,
                       double gamma) {
    Vec offsets(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) offsets[i] = scores[i].offset();
    return energy_margin_loss(offsets, statuses, margin) +
           subspace_focal_loss(scores, statuses, alpha, gamma);
}

namespace {

// S(f; H) for both sub-heads plus what the backward pass needs.
struct HeadScorePair {
    double s_prev = 0.0;
    double s_curr = 0.0;
    Vec softmax_prev;  // over the previous-classes slice
    Vec softmax_curr;  // over the current-classes slice
    Vec unit_f;
    double f_norm = 0.0;
};

HeadScorePair score_heads(const HeadParams& params, std::span<const double> f) {
    HeadScorePair r;
    r.f_norm = norm(f);
    r.unit_f = Vec(f.size(), 0.0);
    if (r.f_norm > 0.0)
        for (std::size_t i = 0; i < f.size(); ++i) r.unit_f[i] = f[i] / r.f_norm;
    Vec z = matvec(params.cls_w, r.unit_f);
    axpy(z, params.cls_b, 1.0);

    const std::size_t split = params.prev_class_count;
    const std::size_t c = params.known_classes();
    std::span<const double> prev_slice(z.data(), split);
    std::span<const double> curr_slice(z.data() + split, c - split);
    r.s_prev = logsumexp(prev_slice);
    r.s_curr = logsumexp(curr_slice);

    auto slice_softmax = [](std::span<const double> s) {
        Vec w(s.begin(), s.end());
        const double mx = *std::max_element(w.begin(), w.end());
        double acc = 0.0;
        for (double& v : w) {
            v = std::exp(v - mx);
            acc += v;
        }
        for (double& v : w) v /= acc;
        return w;
    };
    r.softmax_prev = slice_softmax(prev_slice);
    r.softmax_curr = slice_softmax(curr_slice);
    return r;
}

// Backprop d/dz over the two slices into d/df for one proposal.
void head_score_backward(const HeadParams& params, const HeadScorePair& hs, double ds_prev,
                         double ds_curr, Vec& df) {
    const std::size_t split = params.prev_class_count;
    const std::size_t d = params.feature_dim();
    Vec du(d, 0.0);
    for (std::size_t i = 0; i < hs.softmax_prev.size(); ++i) {
        const double w = ds_prev * hs.softmax_prev[i];
        const double* row = params.cls_w.data.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) du[j] += w * row[j];
    }
    for (std::size_t i = 0; i < hs.softmax_curr.size(); ++i) {
        const double w = ds_curr * hs.softmax_curr[i];
        const double* row = params.cls_w.data.data() + (split + i) * d;
        for (std::size_t j = 0; j < d; ++j) du[j] += w * row[j];
    }
    if (hs.f_norm > 0.0) {
        const double u_dot = dot(hs.unit_f, du);
        for (std::size_t j = 0; j < d; ++j)
            df[j] += (du[j] - u_dot * hs.unit_f[j]) / hs.f_norm;
    }
}

}  // namespace

double distinction_loss(std::span<const Vec> prev_features, std::span<const Vec> curr_features,
                        const HeadParams& params, std::vector<Vec>* dprev,
                        std::vector<Vec>* dcurr) {
    if (dprev) dprev->assign(prev_features.size(), Vec(params.feature_dim(), 0.0));
    if (dcurr) dcurr->assign(curr_features.size(), Vec(params.feature_dim(), 0.0));
    if (prev_features.empty() && curr_features.empty()) return 0.0;
    const std::size_t split = params.prev_class_count;
    if (split == 0 || split >= params.known_classes())
        throw std::invalid_argument("distinction_loss: both sub-heads must be non-empty");

    double loss = 0.0;
    const double inv_p = prev_features.empty() ? 0.0 : 1.0 / static_cast<double>(prev_features.size());
    const double inv_q = curr_features.empty() ? 0.0 : 1.0 / static_cast<double>(curr_features.size());

    for (std::size_t i = 0; i < prev_features.size(); ++i) {
        const HeadScorePair hs = score_heads(params, prev_features[i]);
        loss += softplus(hs.s_curr - hs.s_prev) * inv_p;
        if (dprev) {
            const double g = sigmoid(hs.s_curr - hs.s_prev) * inv_p;
            head_score_backward(params, hs, -g, g, (*dprev)[i]);
        }
    }
    for (std::size_t i = 0; i < curr_features.size(); ++i) {
        const HeadScorePair hs = score_heads(params, curr_features[i]);
        loss += softplus(hs.s_prev - hs.s_curr) * inv_q;
        if (dcurr) {
            const double g = sigmoid(hs.s_prev - hs.s_curr) * inv_q;
            head_score_backward(params, hs, g, -g, (*dcurr)[i]);
        }
    }
    return loss;
}

double l1_box_loss(const Box& pred, const Box& gt, double dpred[4]) {
    if (!gt.valid()) throw std::invalid_argument("l1_box_loss: degenerate gt box");
    const double dp[4] = {pred.x1 - gt.x1, pred.y1 - gt.y1, pred.x2 - gt.x2, pred.y2 - gt.y2};
    double loss = 0.0;
    for (int k = 0; k < 4; ++k) {
        loss += std::abs(dp[k]);
        if (dpred) dpred[k] = dp[k] > 0.0 ? 1.0 : (dp[k] < 0.0 ? -1.0 : 0.0);
    }
    return loss;
}

double giou_loss(const Box& pred, const Box& gt, double dpred[4]) {
    if (!gt.valid()) throw std::invalid_argument("giou_loss: degenerate gt box");
    const double loss = 1.0 - giou(pred, gt);
    if (!dpred) return loss;

    const double iw = std::min(pred.x2, gt.x2) - std::max(pred.x1, gt.x1);
    const double ih = std::min(pred.y2, gt.y2) - std::max(pred.y1, gt.y1);
    const bool has_inter = iw > 0.0 && ih > 0.0;
    const double inter = has_inter ? iw * ih : 0.0;

    const double wp = pred.x2 - pred.x1;
    const double hp = pred.y2 - pred.y1;
    const bool pred_pos = wp > 0.0 && hp > 0.0;
    const double area_p = pred_pos ? wp * hp : 0.0;
    const double area_g = (gt.x2 - gt.x1) * (gt.y2 - gt.y1);
    const double uni = area_p + area_g - inter;

    const double hw = std::max(pred.x2, gt.x2) - std::min(pred.x1, gt.x1);
    const double hh = std::max(pred.y2, gt.y2) - std::min(pred.y1, gt.y1);
    const double hull = hw * hh;

    // Partials of intersection, pred area, and hull w.r.t. the pred corners.
    double d_inter[4] = {0, 0, 0, 0};
    if (has_inter) {
        if (pred.x1 > gt.x1) d_inter[0] = -ih;
        if (pred.y1 > gt.y1) d_inter[1] = -iw;
        if (pred.x2 < gt.x2) d_inter[2] = ih;
        if (pred.y2 < gt.y2) d_inter[3] = iw;
    }
    double d_area[4] = {0, 0, 0, 0};
    if (pred_pos) {
        d_area[0] = -hp;
        d_area[1] = -wp;
        d_area[2] = hp;
        d_area[3] = wp;
    }
    double d_hull[4] = {0, 0, 0, 0};
    if (pred.x1 < gt.x1) d_hull[0] = -hh;
    if (pred.y1 < gt.y1) d_hull[1] = -hw;
    if (pred.x2 > gt.x2) d_hull[2] = hh;
    if (pred.y2 > gt.y2) d_hull[3] = hw;

    for (int k = 0; k < 4; ++k) {
        const double d_uni = d_area[k] - d_inter[k];
        // giou = inter/uni - 1 + uni/hull
        const double d_giou = (d_inter[k] * uni - inter * d_uni) / (uni * uni) +
                              (d_uni * hull - uni * d_hull[k]) / (hull * hull);
        dpred[k] = -d_giou;
    }
    return loss;
}

Gradients Gradients::zeros_like(const HeadParams& p) {
    Gradients g;
    g.feat_w = Mat(p.feat_w.rows, p.feat_w.cols);
    g.feat_b = Vec(p.feat_b.size(), 0.0);
    g.cls_w = Mat(p.cls_w.rows, p.cls_w.cols);
    g.cls_b = Vec(p.cls_b.size(), 0.0);
    g.box_w = Mat(p.box_w.rows, p.box_w.cols);
    g.box_b = Vec(p.box_b.size(), 0.0);
    return g;
}

LossBreakdown total_loss(const ProposalBatch& batch, const EtfFrame& frame,
                         const HeadParams& params, const LossWeights& weights, bool replay_active,
                         Gradients* grads) {
    const std::size_t n = batch.size();
    if (grads) *grads = Gradients::zeros_like(params);
    LossBreakdown out;
    if (n == 0) return out;

    const std::size_t num_nodes = params.cls_w.rows;  // C+1
    const double inv_n = 1.0 / static_cast<double>(n);

    std::size_t gt_count = 0;
    for (const MatchStatus& s : batch.status) gt_count += s.is_gt() ? 1 : 0;
    const double inv_m = gt_count > 0 ? 1.0 / static_cast<double>(gt_count) : 0.0;

    // Distinction bookkeeping: GT-matched proposals split by task of origin.
    std::size_t prev_count = 0, curr_count = 0;
    const bool heads_split =
        params.prev_class_count > 0 && params.prev_class_count < params.known_classes();
    if (replay_active && heads_split) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!batch.status[i].is_gt()) continue;
            (batch.from_prev[i] ? prev_count : curr_count)++;
        }
    }
    const double inv_prev = prev_count > 0 ? 1.0 / static_cast<double>(prev_count) : 0.0;
    const double inv_curr = curr_count > 0 ? 1.0 / static_cast<double>(curr_count) : 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        const HeadOutputs o = forward(params, batch.raw[i]);
        const SubspaceScores sc = score_subspaces(frame, o.f);
        const MatchStatus& st = batch.status[i];

        // Adjoints accumulated for this proposal.
        Vec dz_cls(num_nodes, 0.0);
        double dz_obj = 0.0;
        double dz_box[4] = {0, 0, 0, 0};
        double ds_known = 0.0, ds_unknown = 0.0;

        // ---- classification focal on the joint logits ----
        {
            std::vector<int> target(num_nodes, 0);
            if (st.is_gt())
                target[static_cast<std::size_t>(st.class_id)] = 1;
            else if (st.is_pseudo())
                target[params.unknown_node()] = 1;

            const double denom = logsumexp(o.z_cls);
            const double obj = sigmoid(o.z_obj);
            Vec smax(num_nodes), p(num_nodes), z_jt(num_nodes);
            std::vector<bool> clamped(num_nodes);
            for (std::size_t c = 0; c < num_nodes; ++c) {
                smax[c] = std::exp(o.z_cls[c] - denom);
                const double praw = smax[c] * obj;
                clamped[c] = praw < kProbClamp || praw > 1.0 - kProbClamp;
                p[c] = std::clamp(praw, kProbClamp, 1.0 - kProbClamp);
                z_jt[c] = std::log(p[c] / (1.0 - p[c]));
            }

            double focal_sum = 0.0;
            Vec gp(num_nodes, 0.0);  // d focal / d p
            for (std::size_t c = 0; c < num_nodes; ++c) {
                double dz = 0.0;
                focal_sum += focal_entry(z_jt[c], target[c], weights.alpha, weights.gamma, &dz);
                gp[c] = clamped[c] ? 0.0 : dz / (p[c] * (1.0 - p[c]));
            }
            out.cls += focal_sum * inv_n;

            if (grads) {
                const double scale = weights.cls * inv_n;
                double weighted = 0.0;  // sum_c gp_c * smax_c
                for (std::size_t c = 0; c < num_nodes; ++c) weighted += gp[c] * smax[c];
                for (std::size_t c = 0; c < num_nodes; ++c)
                    dz_cls[c] += scale * obj * smax[c] * (gp[c] - weighted);
                dz_obj += scale * obj * (1.0 - obj) * weighted;
            }
        }

        // ---- box regression (GT-matched only) ----
        if (st.is_gt()) {
            const Box pred{o.z_bbox[0], o.z_bbox[1], o.z_bbox[2], o.z_bbox[3]};
            double dl1[4], dgi[4];
            const double l1 = l1_box_loss(pred, batch.gt_boxes[i], grads ? dl1 : nullptr);
            const double gl = giou_loss(pred, batch.gt_boxes[i], grads ? dgi : nullptr);
            out.l1 += l1 * inv_m;
            out.giou += gl * inv_m;
            if (grads)
                for (int k = 0; k < 4; ++k)
                    dz_box[k] += inv_m * (weights.l1 * dl1[k] + weights.giou * dgi[k]);
        }

        // ---- subspace separation (margin + focal on scores) ----
        {
            const double delta = sc.offset();
            double d_delta = 0.0;
            if (st.is_gt()) {
                const double h = std::max(0.0, weights.margin + delta);
                out.energy_margin += h * h * inv_n;
                d_delta = 2.0 * h * inv_n;
            } else if (st.is_pseudo()) {
                const double h = std::max(0.0, weights.margin - delta);
                out.energy_margin += h * h * inv_n;
                d_delta = -2.0 * h * inv_n;
            }

            const int tk = st.is_gt() ? 1 : 0;
            const int tu = st.is_pseudo() ? 1 : 0;
            double dk = 0.0, du = 0.0;
            out.subspace_focal +=
                focal_entry(sc.s_known, tk, weights.alpha, weights.gamma, grads ? &dk : nullptr) *
                inv_n;
            out.subspace_focal +=
                focal_entry(sc.s_unknown, tu, weights.alpha, weights.gamma, grads ? &du : nullptr) *
                inv_n;

            if (grads) {
                ds_known += weights.separation * (dk * inv_n - d_delta);
                ds_unknown += weights.separation * (du * inv_n + d_delta);
            }
        }

        // ---- previous/current head distinction (replay only) ----
        if (replay_active && heads_split && st.is_gt()) {
            const std::size_t split = params.prev_class_count;
            const std::size_t c_known = params.known_classes();
            std::span<const double> prev_slice(o.z_cls.data(), split);
            std::span<const double> curr_slice(o.z_cls.data() + split, c_known - split);
            const double s_prev = logsumexp(prev_slice);
            const double s_curr = logsumexp(curr_slice);
            const bool is_prev = batch.from_prev[i] != 0;
            const double gap = is_prev ? s_curr - s_prev : s_prev - s_curr;
            const double side_inv = is_prev ? inv_prev : inv_curr;
            out.distinction += softplus(gap) * side_inv;

            if (grads) {
                const double g = weights.distinction * sigmoid(gap) * side_inv;
                const double d_sprev = is_prev ? -g : g;
                const double d_scurr = is_prev ? g : -g;
                for (std::size_t c = 0; c < split; ++c)
                    dz_cls[c] += d_sprev * std::exp(prev_slice[c] - s_prev);
                for (std::size_t c = 0; c < c_known - split; ++c)
                    dz_cls[split + c] += d_scurr * std::exp(curr_slice[c] - s_curr);
            }
        }

        // ---- backprop to parameters ----
        if (grads) {
            Vec df(params.feature_dim(), 0.0);

            add_outer(grads->box_w, std::span<const double>(dz_box, 4), o.f);
            for (int k = 0; k < 4; ++k) grads->box_b[k] += dz_box[k];
            for (int k = 0; k < 4; ++k)
                if (dz_box[k] != 0.0)
                    for (std::size_t j = 0; j < df.size(); ++j)
                        df[j] += dz_box[k] * params.box_w(static_cast<std::size_t>(k), j);

            add_outer(grads->cls_w, dz_cls, o.unit_f);
            axpy(grads->cls_b, dz_cls, 1.0);
            const Vec du = matvec_transposed(params.cls_w, dz_cls);
            if (o.f_norm > 0.0) {
                const double u_dot = dot(o.unit_f, du);
                for (std::size_t j = 0; j < df.size(); ++j)
                    df[j] += (du[j] - u_dot * o.unit_f[j]) / o.f_norm;
            }

            grads->obj_w += dz_obj * o.f_norm;
            grads->obj_b += dz_obj;
            if (o.f_norm > 0.0)
                for (std::size_t j = 0; j < df.size(); ++j)
                    df[j] += dz_obj * params.obj_w * o.unit_f[j];

            if (ds_known != 0.0) add_score_gradient(frame.known_half(), o.f, ds_known, df);
            if (ds_unknown != 0.0) add_score_gradient(frame.unknown_half(), o.f, ds_unknown, df);

            add_outer(grads->feat_w, df, batch.raw[i]);
            axpy(grads->feat_b, df, 1.0);
        }
    }

    out.total = weights.cls * out.cls + weights.l1 * out.l1 + weights.giou * out.giou +
                weights.separation * (out.energy_margin + out.subspace_focal) +
                (replay_active ? weights.distinction * out.distinction : 0.0);
    return out;
}

}  // namespace owd
