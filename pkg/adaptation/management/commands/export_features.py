import numpy as np

from adaptation.data.corpus import load_corpus
from adaptation.engine.checkpoint import load_checkpoint
from adaptation.engine.losses import SOURCE, TARGET
from adaptation.exceptions import ConfigurationError
from adaptation.management.base import AdaptationCommand
from adaptation.services.evaluation import FEATURE_VIEWS, FeatureDump, default_pad_view, export_features


class Command(AdaptationCommand):
    help = ('Write per-utterance features of one view as CSV (id, domain, label, f_0, ...). '
            'The dual view is the stance feature, fused for dual-view models.')

    def add_arguments(self, parser):
        parser.add_argument('checkpoint', help='Checkpoint written by the train command')
        parser.add_argument('output', help='CSV file to write')
        parser.add_argument('--source', help='Source corpus TSV')
        parser.add_argument('--target', help='Target corpus TSV')
        parser.add_argument('--view', choices=FEATURE_VIEWS,
                            help='Feature view (default: dual, or the single view of an ablation model)')

    def run(self, **options):
        inputs = [(options.get('source'), SOURCE), (options.get('target'), TARGET)]
        inputs = [(path, domain) for path, domain in inputs if path]
        if not inputs:
            raise ConfigurationError("export_features needs --source, --target or both")
        model = load_checkpoint(options['checkpoint'])
        view = options.get('view') or default_pad_view(model)

        parts = [export_features(model, load_corpus(path, domain), view) for path, domain in inputs]
        dump = FeatureDump(
            view=view,
            ids=[i for part in parts for i in part.ids],
            domains=[d for part in parts for d in part.domains],
            labels=[label for part in parts for label in part.labels],
            features=np.vstack([part.features for part in parts]),
        )
        dump.write_csv(options['output'])
        self.write_mapping({
            'view': view,
            'n': len(dump),
            'width': dump.width,
            'output': options['output'],
        })
