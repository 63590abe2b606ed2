#include "pointseg/pipeline.hpp"

namespace pointseg {

EncodedTargets encode_sample(const Sample& sample, const EncodeConfig& config) {
    const Dims dims = sample.image.dims();
    EncodedTargets t;
    t.voronoi = voronoi_encode(sample.points, dims, config.dot_radius);
    LocalClusterOptions opts;
    opts.distance_weight = config.distance_weight;
    opts.dot_radius = config.dot_radius;
    t.cluster = local_cluster_encode(sample.image, sample.points, t.voronoi.partition, opts);
    t.repel = repel_encode(sample.points, dims, config.repel);
    t.filtered = filtered_repel(t.repel, t.cluster.target);
    return t;
}

TrainingTargets training_targets(const EncodedTargets& encoded, const EncodeConfig& config) {
    return {encoded.voronoi.target, encoded.cluster.target, config.filter_repel ? encoded.filtered : encoded.repel};
}

Prediction predict(const ModelParams& params, const NormalizedImage& image, const PostConfig& config) {
    Prediction p;
    p.prob = forward(params, image);
    p.mask = argmax_mask(p.prob);
    p.instances = extract_instances(p.mask);
    p.detections = detect_cells(p.prob, config.min_distance, config.threshold);
    return p;
}

ImageEval evaluate_image(const Prediction& prediction, const Sample& truth, double match_radius) {
    ImageEval e;
    e.detection = detection_metrics(prediction.detections, truth.points, match_radius);
    e.predicted_count = static_cast<int>(prediction.detections.size());
    e.true_count = static_cast<int>(truth.points.size());
    if (truth.instances) {
        e.pixel = pixel_metrics(prediction.mask, foreground(*truth.instances));
        e.aji = aji(prediction.instances, *truth.instances);
        e.dice = object_dice(prediction.instances, *truth.instances);
    }
    return e;
}

EvalSummary summarize(std::vector<ImageEval> images) {
    EvalSummary s;
    s.images = std::move(images);
    if (s.images.empty()) return s;
    std::vector<double> predicted, truth;
    for (const ImageEval& e : s.images) {
        s.seg.acc += e.pixel.acc;
        s.seg.f1 += e.pixel.f1.value;
        s.seg.aji += e.aji.value;
        s.seg.object_dice += e.dice.value;
        s.det.tp += e.detection.tp;
        s.det.fp += e.detection.fp;
        s.det.fn += e.detection.fn;
        predicted.push_back(e.predicted_count);
        truth.push_back(e.true_count);
    }
    const double n = static_cast<double>(s.images.size());
    s.seg.acc /= n;
    s.seg.f1 /= n;
    s.seg.aji /= n;
    s.seg.object_dice /= n;
    s.det.precision = s.det.tp + s.det.fp > 0 ? static_cast<double>(s.det.tp) / (s.det.tp + s.det.fp) : 0.0;
    s.det.recall = s.det.tp + s.det.fn > 0 ? static_cast<double>(s.det.tp) / (s.det.tp + s.det.fn) : 0.0;
    if (s.images.size() >= 2) {
        const Score c = ccc(predicted, truth);
        s.det.ccc = c.value;
        s.ccc_degenerate = c.degenerate;
    }
    return s;
}

ImageRGB overlay(const ImageRGB& image, const InstanceMask& instances, const DetectionSet& detections) {
    ImageRGB out = image;
    const Dims dims = image.dims();
    for (int r = 0; r < dims.height; ++r) {
        for (int c = 0; c < dims.width; ++c) {
            const int id = instances(r, c);
            if (id == 0) continue;
            const bool edge = r == 0 || c == 0 || r + 1 == dims.height || c + 1 == dims.width ||
                              instances(r - 1, c) != id || instances(r + 1, c) != id ||
                              instances(r, c - 1) != id || instances(r, c + 1) != id;
            if (edge) out(r, c) = {0, 200, 0};
        }
    }
    for (const Detection& d : detections) {
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (std::abs(dr) + std::abs(dc) <= 1 && dims.contains(d.y + dr, d.x + dc)) out(d.y + dr, d.x + dc) = {255, 0, 0};
            }
        }
    }
    return out;
}

}  // namespace pointseg
