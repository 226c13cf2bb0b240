from adaptation.data.corpus import load_corpus
from adaptation.engine.checkpoint import load_checkpoint
from adaptation.engine.losses import SOURCE, TARGET
from adaptation.management.base import AdaptationCommand
from adaptation.services.evaluation import evaluate


class Command(AdaptationCommand):
    help = 'Score a checkpoint on a labeled corpus: 3-class macro-F1, favour/against macro-F1 and accuracy'

    def add_arguments(self, parser):
        parser.add_argument('checkpoint', help='Checkpoint written by the train command')
        parser.add_argument('corpus', help='Labeled corpus TSV (id, topic, text, stance)')
        parser.add_argument('--domain', choices=[SOURCE, TARGET], default=TARGET,
                            help='Domain tag of the corpus (default: target)')

    def run(self, **options):
        model = load_checkpoint(options['checkpoint'])
        result = evaluate(model, load_corpus(options['corpus'], options['domain']))
        self.write_mapping({
            'variant': model.variant,
            'macro_f1': result.macro_f1,
            'semeval_f1': result.semeval_f1,
            'accuracy': result.accuracy,
            'n': result.n,
        })
