#include <doctest.h>

#include <filesystem>

#include "pointseg/io.hpp"

using namespace pointseg;

namespace {

std::filesystem::path scratch(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / "pointseg_io_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("png round trips") {
    ImageRGB rgb(Dims{5, 7});
    for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = {std::uint8_t(i), std::uint8_t(3 * i), std::uint8_t(255 - i)};
    write_png_rgb(scratch("rgb.png").string(), rgb);
    CHECK(read_png_rgb(scratch("rgb.png").string()) == rgb);

    TriStateLabelMap labels({3, 4}, Label::Ignored);
    labels(0, 0) = Label::Foreground;
    labels(2, 3) = Label::Background;
    write_label_map(scratch("labels.png").string(), labels);
    CHECK(read_label_map(scratch("labels.png").string()) == labels);

    InstanceMask inst({4, 4}, 0);
    inst(1, 1) = 300;
    inst(3, 0) = 2;
    write_instances(scratch("inst.png").string(), inst);
    CHECK(read_instances(scratch("inst.png").string()) == inst);

    RepelMap repel({3, 3}, 0.0);
    repel(1, 1) = 1.0;
    repel(0, 2) = 0.123456;
    write_repel_map(scratch("repel.png").string(), repel, {});
    const RepelMap back = read_repel_map(scratch("repel.png").string());
    for (std::size_t i = 0; i < repel.size(); ++i) CHECK(std::abs(back[i] - repel[i]) <= 0.5 / kRepelScale);
    CHECK(std::filesystem::exists(scratch("repel.png.json")));

    CHECK_THROWS_AS(read_png_rgb(scratch("missing.png").string()), Error);
    write_text(scratch("junk.png").string(), "not a png");
    CHECK_THROWS_AS(read_png_rgb(scratch("junk.png").string()), Error);
}

TEST_CASE("png output is byte-stable") {
    ImageRGB rgb({9, 9}, Rgb{10, 20, 30});
    write_png_rgb(scratch("a.png").string(), rgb);
    write_png_rgb(scratch("b.png").string(), rgb);
    CHECK(read_text(scratch("a.png").string()) == read_text(scratch("b.png").string()));
}

TEST_CASE("params and stats json round trip") {
    const ModelParams p = init_params(3);
    CHECK(params_from_json(params_to_json(p)) == p);
    CHECK_THROWS_AS(params_from_json("{\"architecture\": [[3, 4]], \"values\": []}"), Error);
    NormStats s{{1.5, 2.5, 3.5}, {0.1, 0.2, 0.3}};
    const NormStats t = stats_from_json(stats_to_json(s));
    CHECK(t.mean == s.mean);
    CHECK(t.std == s.std);
}

TEST_CASE("csv writers") {
    CHECK(points_to_csv({{1.5, 2, -1}, {3, 4, 2}}) == "1.5,2\n3,4,2\n");
    CHECK(detections_to_csv({{3, 4, 0.5}}) == "x,y,score\n3,4,0.5\n");
}
