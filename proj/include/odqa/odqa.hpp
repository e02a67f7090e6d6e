#pragma once

#include "odqa/corpus.hpp"
#include "odqa/date.hpp"
#include "odqa/dense.hpp"
#include "odqa/errors.hpp"
#include "odqa/eval.hpp"
#include "odqa/hash.hpp"
#include "odqa/io.hpp"
#include "odqa/lexical.hpp"
#include "odqa/pipeline.hpp"
#include "odqa/ranked_list.hpp"
#include "odqa/reader.hpp"
#include "odqa/service.hpp"
#include "odqa/stopwords.hpp"
#include "odqa/text.hpp"
