#include <memory>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wwho/error.hpp"
#include "wwho/linguistrie.hpp"
#include "wwho/metatok.hpp"
#include "wwho/utf8.hpp"

namespace py = pybind11;

namespace {

// Token bytes can be partial UTF-8 (byte-level BPE pieces); surrogateescape keeps them lossless.
py::str to_str(const std::string& s) {
    PyObject* o = PyUnicode_DecodeUTF8(s.data(), static_cast<Py_ssize_t>(s.size()), "surrogateescape");
    if (!o) throw py::error_already_set();
    return py::reinterpret_steal<py::str>(o);
}

class Tokenizer {
public:
    explicit Tokenizer(wwho::MetaTokenizer tok) : tok_(std::make_shared<const wwho::MetaTokenizer>(std::move(tok))) {}

    std::vector<wwho::TokenId> encode(const std::string& text) const {
        py::gil_scoped_release release;
        return tok_->encode(text);
    }

    py::str decode(const std::vector<wwho::TokenId>& ids) const {
        std::string out;
        {
            py::gil_scoped_release release;
            out = tok_->decode(ids);
        }
        return to_str(out);
    }

    std::vector<std::string> syllabify(const std::string& text) const {
        std::vector<std::string> out;
        for (const auto& s : wwho::syllabify_text(wwho::decode_utf8(text), tok_->schemas()))
            out.push_back(wwho::encode_utf8(s.text));
        return out;
    }

    py::list token_strings(const std::string& text) const {
        py::list out;
        for (const auto& t : tok_->token_strings(text)) out.append(py::make_tuple(to_str(t.text), t.id));
        return out;
    }

    std::size_t vocab_size() const { return tok_->total_vocab_size(); }
    std::size_t offset() const { return tok_->offset(); }

private:
    std::shared_ptr<const wwho::MetaTokenizer> tok_;
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native WWHO tokenizer core";
    m.attr("__version__") = WWHO_VERSION;

    auto base = py::register_exception<wwho::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<wwho::ParseError>(m, "ParseError", base.ptr());
    py::register_exception<wwho::ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<wwho::RangeError>(m, "RangeError", base.ptr());

    py::class_<Tokenizer>(m, "Tokenizer")
        .def("encode", &Tokenizer::encode, py::arg("text"))
        .def("decode", &Tokenizer::decode, py::arg("ids"))
        .def("syllabify", &Tokenizer::syllabify, py::arg("text"))
        .def("token_strings", &Tokenizer::token_strings, py::arg("text"))
        .def_property_readonly("vocab_size", &Tokenizer::vocab_size)
        .def_property_readonly("offset", &Tokenizer::offset);

    m.def(
        "load", [](const std::string& path) { return Tokenizer(wwho::MetaTokenizer::load(path)); }, py::arg("path"));
}
