from pathlib import Path

from adaptation.data.corpus import load_corpus
from adaptation.data.silver import (
    assign_silver_labels, load_subjectivity_corpus, train_view_labelers, write_silver_labels,
)
from adaptation.engine.losses import SOURCE, TARGET
from adaptation.management.base import AdaptationCommand


class Command(AdaptationCommand):
    help = ('Train subjectivity/objectivity labelers on a subj|obj<TAB>text corpus and write '
            'id<TAB>subj<TAB>obj silver labels for a stance corpus')

    def add_arguments(self, parser):
        parser.add_argument('subjectivity_corpus', help='Two-class subjectivity corpus (subj|obj<TAB>text per line)')
        parser.add_argument('corpus', help='Stance corpus TSV to label')
        parser.add_argument('output', help='Silver-label file to write')
        parser.add_argument('--domain', choices=[SOURCE, TARGET], default=SOURCE,
                            help='Domain tag of the corpus (default: source)')
        parser.add_argument('--seed', type=int, default=0, help='Labeler seed (default: 0)')

    def run(self, **options):
        subj, obj = train_view_labelers(load_subjectivity_corpus(options['subjectivity_corpus']), seed=options['seed'])
        corpus = assign_silver_labels(load_corpus(options['corpus'], options['domain']), subj, obj)
        path = write_silver_labels(corpus, Path(options['output']))
        self.write_mapping({
            'n': len(corpus),
            'subj_positive': sum(ex.silver_subj for ex in corpus),
            'obj_positive': sum(ex.silver_obj for ex in corpus),
            'output': path,
        })
