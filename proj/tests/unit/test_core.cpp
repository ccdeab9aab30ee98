#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "stego/core/config.hpp"
#include "stego/core/errors.hpp"
#include "stego/core/image.hpp"
#include "stego/core/message.hpp"

using namespace stego;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("message generation is deterministic, binary and balanced") {
    Rng a = make_stream(0, 2), b = make_stream(0, 2);
    CHECK(generate_message(4, a) == generate_message(4, b));
    Rng r = make_stream(7, 2);
    const Message one = generate_message(1, r);
    CHECK(one.size() == 1);
    CHECK(one[0] <= 1);
    double sum = 0;
    for (int i = 0; i < 10000; ++i) {
        const Message m = generate_message(100, r);
        for (auto bit : m.bits()) sum += bit;
    }
    const double mean = sum / 1e6;
    CHECK(mean >= 0.45);
    CHECK(mean <= 0.55);
    CHECK(kind_of([&] { generate_message(0, r); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { Message(std::vector<std::uint8_t>{0, 2}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("hex serialization is MSB first and round-trips") {
    CHECK(message_to_hex(Message({1, 0, 1, 0})) == "a0");
    CHECK(message_to_hex(Message({0, 0, 0, 0})) == "00");
    CHECK(hex_to_message("a0", 4) == Message({1, 0, 1, 0}));
    CHECK(hex_length(100) == 26);
    Rng r = make_stream(3, 2);
    for (int i = 0; i < 1000; ++i) {
        const Message m = generate_message(100, r);
        REQUIRE(hex_to_message(message_to_hex(m), 100) == m);
    }
    for (int d : {1, 7, 8, 9, 31}) {
        const Message m = generate_message(d, r);
        CHECK(hex_to_message(message_to_hex(m), d) == m);
    }
    CHECK(kind_of([] { hex_to_message("zz", 4); }) == ErrorKind::Parse);
    CHECK(kind_of([] { hex_to_message("a", 8); }) == ErrorKind::Parse);
    CHECK(kind_of([] { hex_to_message("ab", 12); }) == ErrorKind::Parse);
}

TEST_CASE("png save and load stays within 8-bit quantization") {
    const auto dir = std::filesystem::temp_directory_path() / "stego_unit_core";
    std::filesystem::create_directories(dir);
    const ImageTensor half(16, 24, 0.5);
    save_image(half, dir / "half.png");
    const ImageTensor back = load_image(dir / "half.png", 16, 24);
    for (double v : back.data()) CHECK(std::abs(v - 0.5) <= 1.0 / 255);

    std::mt19937_64 rng(1);
    const auto img = testutil::random_image(32, 32, rng);
    save_image(img, dir / "rand.png");
    const ImageTensor r = load_image(dir / "rand.png", 32, 32);
    double worst = 0;
    for (std::size_t i = 0; i < img.data().size(); ++i) worst = std::max(worst, std::abs(img.data()[i] - r.data()[i]));
    CHECK(worst <= 0.5 / 255 + 1e-12);

    const ImageTensor resized = load_image(dir / "rand.png", 64, 48);
    CHECK(resized.height() == 64);
    CHECK(resized.width() == 48);
    for (double v : resized.data()) REQUIRE((v >= 0.0 && v <= 1.0));

    CHECK(kind_of([&] { load_image(dir / "missing.png", 32, 32); }) == ErrorKind::Io);
    std::ofstream(dir / "junk.png") << "not an image";
    CHECK(kind_of([&] { load_image(dir / "junk.png", 32, 32); }) == ErrorKind::Io);
    CHECK(kind_of([&] { load_image(dir / "rand.png", 30, 32); }) == ErrorKind::Config);
    std::filesystem::remove_all(dir);
}

TEST_CASE("image and tensor conversions are inverse") {
    std::mt19937_64 rng(2);
    const auto img = testutil::random_image(8, 16, rng);
    const auto t = to_tensor(img);
    CHECK(t.shape() == nn::Shape{1, 3, 8, 16});
    CHECK(t.at(0, 2, 3, 5) == img.at(3, 5, 2));
    CHECK(image_from_tensor(t) == img);
}

TEST_CASE("config parses, validates and round-trips as text") {
    const RunConfig c = parse_config("# comment\nd = 32\nimage_size = 64x48\nalpha3 = 0.5\ntau1=0.8\n");
    CHECK(c.d == 32);
    CHECK(c.image_height == 64);
    CHECK(c.image_width == 48);
    CHECK(c.loss_weights.alpha3 == 0.5);
    CHECK(c.tau1 == 0.8);
    const RunConfig again = parse_config(c.to_text());
    CHECK(again.to_text() == c.to_text());
    for (const auto& k : RunConfig::keys()) CHECK(RunConfig::has_key(k));

    CHECK(kind_of([] { parse_config("tau1 = 0.99\ntau2 = 0.9\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_config("learning_rate = 0\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_config("d = 0\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_config("image_size = 30x32\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_config("d = abc\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_config("no_such_key = 1\n"); }) == ErrorKind::Config);
    RunConfig m;
    CHECK(kind_of([&] { m.set("no_such_key", "1"); }) == ErrorKind::Usage);
}
